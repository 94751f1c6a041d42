//! Continuous relaxation of the allocation model, used as a lower bound.

use microlp::{ComparisonOp, OptimizationDirection, Problem, SolveOutcome};

use super::{MilpProblem, OptError, Sense};

/// Optimal value of the model with every binary relaxed to `[0, 1]`.
///
/// Returns [`OptError::Infeasible`] when even the relaxation has no point;
/// the witness is the first demand (the relaxation cannot name one).
pub fn lp_bound(problem: &MilpProblem) -> Result<f64, OptError> {
    let mut lp = Problem::new(OptimizationDirection::Minimize);
    let vars: Vec<_> = problem.vars.iter().map(|v| lp.add_var(v.cost, (0.0, 1.0))).collect();
    for c in &problem.constraints {
        let expr: Vec<_> = c.terms.iter().map(|&(v, coef)| (vars[v], coef)).collect();
        let op = match c.sense {
            Sense::Le => ComparisonOp::Le,
            Sense::Eq => ComparisonOp::Eq,
            Sense::Ge => ComparisonOp::Ge,
        };
        lp.add_constraint(expr.as_slice(), op, c.rhs);
    }
    match lp.solve() {
        Ok(SolveOutcome::Solution(sol)) => Ok(sol.objective()),
        Ok(SolveOutcome::Interrupted(_)) => Err(OptError::Relaxation("interrupted".into())),
        Err(microlp::Error::Infeasible) => match problem.demands.first() {
            Some(&demand) => Err(OptError::Infeasible { demand }),
            None => Err(OptError::Relaxation("infeasible".into())),
        },
        Err(e) => Err(OptError::Relaxation(e.to_string())),
    }
}
