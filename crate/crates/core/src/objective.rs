use thiserror::Error;

/// Failure reported by a user objective.
#[derive(Debug, Clone, Error)]
#[error("{0}")]
pub struct ObjectiveError(pub String);

/// A black-box function to be maximized.
pub trait Objective {
    fn evaluate(&mut self, x: &[f64]) -> Result<f64, ObjectiveError>;
}

impl<F> Objective for F
where
    F: FnMut(&[f64]) -> Result<f64, ObjectiveError>,
{
    fn evaluate(&mut self, x: &[f64]) -> Result<f64, ObjectiveError> {
        self(x)
    }
}

pub(crate) fn evaluate_at<O: Objective + ?Sized>(objective: &mut O, x: &[f64], iteration: usize) -> crate::Result<f64> {
    objective.evaluate(x).map_err(|e| crate::Error::Objective {
        iteration,
        message: e.0,
    })
}
