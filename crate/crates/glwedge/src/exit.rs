//! Process exit codes.

use std::fmt;

use glwedge_core::Error as CoreError;

pub const OK: i32 = 0;
pub const SOLVER_FAILURE: i32 = 1;
pub const VALIDATION_FAILURE: i32 = 2;
pub const USAGE: i32 = 64;

/// Input that parses but is rejected, or a check that did not pass.
#[derive(Debug)]
pub struct ValidationFailure(pub String);

impl fmt::Display for ValidationFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ValidationFailure {}

/// Exit code of a failed run: 2 for rejected input, 1 for solver and I/O
/// failures.
pub fn exit_code(err: &anyhow::Error) -> i32 {
    for cause in err.chain() {
        if cause.is::<ValidationFailure>() {
            return VALIDATION_FAILURE;
        }
        if let Some(e) = cause.downcast_ref::<CoreError>() {
            return match e {
                CoreError::InvalidParameter(_)
                | CoreError::DimensionMismatch { .. }
                | CoreError::DegenerateWeight(_)
                | CoreError::Geometry(_)
                | CoreError::Validation(_) => VALIDATION_FAILURE,
                CoreError::Json(_) => VALIDATION_FAILURE,
                _ => SOLVER_FAILURE,
            };
        }
    }
    SOLVER_FAILURE
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn codes_follow_the_error_kind() {
        let v = anyhow::Error::new(ValidationFailure("x".into())).context("outer");
        assert_eq!(exit_code(&v), VALIDATION_FAILURE);
        let c = anyhow::Error::new(CoreError::NoConvergence { iterations: 3, residual: 1.0 });
        assert_eq!(exit_code(&c), SOLVER_FAILURE);
        let g = anyhow::Error::new(CoreError::Geometry("bad".into()));
        assert_eq!(exit_code(&g), VALIDATION_FAILURE);
        assert_eq!(exit_code(&anyhow::anyhow!("io")), SOLVER_FAILURE);
    }
}
