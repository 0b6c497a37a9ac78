//! Central finite-difference gradient checking.

use super::Params;

/// Relative errors use `max(|analytic|, |numeric|, DENOMINATOR_FLOOR)` as the
/// denominator so that gradients that are zero up to rounding do not report
/// spurious relative errors.
pub const DENOMINATOR_FLOOR: f64 = 1e-7;

#[derive(Clone, Debug, PartialEq)]
pub struct BlockError {
    pub name: String,
    pub max_rel_error: f64,
    pub max_abs_error: f64,
    pub worst_index: usize,
    pub checked: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GradCheckReport {
    pub blocks: Vec<BlockError>,
    pub epsilon: f64,
    pub tolerance: f64,
}

impl GradCheckReport {
    pub fn max_rel_error(&self) -> f64 {
        self.blocks
            .iter()
            .map(|b| b.max_rel_error)
            .fold(0.0, f64::max)
    }

    pub fn passed(&self) -> bool {
        self.max_rel_error() < self.tolerance
    }

    pub fn failing_blocks(&self) -> impl Iterator<Item = &BlockError> {
        self.blocks
            .iter()
            .filter(move |b| b.max_rel_error >= self.tolerance)
    }
}

/// Compares `analytic` against central differences of `loss` around `model`.
/// `model` is restored to its original values on return.
pub fn grad_check<M, F>(
    model: &mut M,
    analytic: &M,
    mut loss: F,
    epsilon: f64,
    tolerance: f64,
) -> GradCheckReport
where
    M: Params<f64>,
    F: FnMut(&M) -> f64,
{
    let analytic_blocks: Vec<(String, Vec<f64>)> = analytic
        .params()
        .into_iter()
        .map(|p| (p.name, p.data.to_vec()))
        .collect();
    let mut blocks = Vec::with_capacity(analytic_blocks.len());
    for (b, (name, grad)) in analytic_blocks.iter().enumerate() {
        let mut worst = BlockError {
            name: name.clone(),
            max_rel_error: 0.0,
            max_abs_error: 0.0,
            worst_index: 0,
            checked: grad.len(),
        };
        for (i, &a) in grad.iter().enumerate() {
            let original = model.params()[b].data[i];
            model.params_mut()[b].data[i] = original + epsilon;
            let plus = loss(model);
            model.params_mut()[b].data[i] = original - epsilon;
            let minus = loss(model);
            model.params_mut()[b].data[i] = original;
            let numeric = (plus - minus) / (2.0 * epsilon);
            let abs = (a - numeric).abs();
            let rel = abs / a.abs().max(numeric.abs()).max(DENOMINATOR_FLOOR);
            if rel > worst.max_rel_error || !rel.is_finite() {
                worst.max_rel_error = if rel.is_finite() { rel } else { f64::INFINITY };
                worst.worst_index = i;
            }
            worst.max_abs_error = worst.max_abs_error.max(abs);
        }
        blocks.push(worst);
    }
    GradCheckReport {
        blocks,
        epsilon,
        tolerance,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nnkernel::ParamVec;

    #[test]
    fn corrupted_gradient_is_reported() {
        let mut x = ParamVec {
            name: "x".into(),
            data: vec![1.0, 2.0],
        };
        // d/dx Σ x² = 2x; corrupt the second entry.
        let analytic = ParamVec {
            name: "x".into(),
            data: vec![2.0, 4.5],
        };
        let report = grad_check(
            &mut x,
            &analytic,
            |p| p.data.iter().map(|v| v * v).sum(),
            1e-5,
            1e-6,
        );
        assert!(!report.passed());
        assert_eq!(report.blocks[0].worst_index, 1);
        assert!(report.max_rel_error() > 0.1);
        assert_eq!(x.data, vec![1.0, 2.0]);
    }

    #[test]
    fn exact_gradient_passes() {
        let mut x = ParamVec {
            name: "x".into(),
            data: vec![1.0, -2.0, 0.5],
        };
        let analytic = ParamVec {
            name: "x".into(),
            data: vec![3.0, 12.0, 0.75],
        };
        let report = grad_check(
            &mut x,
            &analytic,
            |p| p.data.iter().map(|v| v * v * v).sum(),
            1e-5,
            1e-6,
        );
        assert!(report.passed(), "{report:?}");
    }
}
