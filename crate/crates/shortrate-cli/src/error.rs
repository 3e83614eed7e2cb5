use shortrate::model::ModelError;
use shortrate::montecarlo::McError;
use shortrate::numerics::NumericsError;
use shortrate::pricing::PricingError;
use shortrate::specfun::SpecfunError;
use shortrate::spectral::SpectralError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("config: {0}")]
    Config(String),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("thread pool: {0}")]
    Pool(#[from] rayon::ThreadPoolBuildError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error(transparent)]
    Pricing(#[from] PricingError),
    #[error(transparent)]
    Simulation(#[from] McError),
    #[error("consistency check failed: {0}")]
    Consistency(String),
}

pub type Result<T> = std::result::Result<T, CliError>;

impl CliError {
    /// 1 for bad input, 2 when a computation could not be trusted.
    pub fn exit_code(&self) -> u8 {
        let internal = match self {
            Self::Usage(_) | Self::Config(_) | Self::Io(_) | Self::Simulation(_) => false,
            Self::Pool(_) | Self::Consistency(_) => true,
            Self::Model(e) => model_internal(e),
            Self::Spectral(e) => spectral_internal(e),
            Self::Pricing(e) => pricing_internal(e),
        };
        if internal {
            2
        } else {
            1
        }
    }
}

fn numerics_internal(_: &NumericsError) -> bool {
    true
}

fn specfun_internal(e: &SpecfunError) -> bool {
    matches!(
        e,
        SpecfunError::NoConvergence { .. } | SpecfunError::Cancellation { .. }
    )
}

fn model_internal(e: &ModelError) -> bool {
    match e {
        ModelError::InvalidParams(_) | ModelError::OutOfDomain { .. } => false,
        ModelError::Inconclusive(_) => true,
        ModelError::Numerics(e) => numerics_internal(e),
    }
}

fn spectral_internal(e: &SpectralError) -> bool {
    match e {
        SpectralError::BracketScanExhausted { .. } => true,
        SpectralError::Specfun(e) => specfun_internal(e),
        SpectralError::Numerics(e) => numerics_internal(e),
        _ => false,
    }
}

fn pricing_internal(e: &PricingError) -> bool {
    match e {
        PricingError::SeriesNotConverged { .. } | PricingError::BoundViolation { .. } => true,
        PricingError::Model(e) => model_internal(e),
        PricingError::Spectral(e) => spectral_internal(e),
        PricingError::Numerics(e) => numerics_internal(e),
        PricingError::Specfun(e) => specfun_internal(e),
        _ => false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes() {
        assert_eq!(CliError::Usage("x".into()).exit_code(), 1);
        assert_eq!(
            CliError::Spectral(SpectralError::RequiresKHalf).exit_code(),
            1
        );
        assert_eq!(CliError::Consistency("x".into()).exit_code(), 2);
        let series = PricingError::SeriesNotConverged {
            terms: 3,
            last_term: 1.0,
            partial_sum: 1.0,
        };
        assert_eq!(CliError::Pricing(series).exit_code(), 2);
        let nested = PricingError::Spectral(SpectralError::Specfun(SpecfunError::NoConvergence {
            terms: 9,
        }));
        assert_eq!(CliError::Pricing(nested).exit_code(), 2);
        assert_eq!(
            CliError::Model(ModelError::InvalidParams("a".into())).exit_code(),
            1
        );
    }
}
