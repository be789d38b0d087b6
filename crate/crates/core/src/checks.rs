//! Logical relations, consistency conditions and outcome sets for each check.
//!
//! The outcome set Ω of a check is every joint resolution of its questions
//! that some state of the world can produce. It is generated by enumerating
//! {T, F, N/A}^n and keeping the vectors reachable from a base world
//! `(p, q, r)` of booleans.

use std::sync::OnceLock;

use crate::error::Result;
use crate::model::{CheckKind, ResolutionOpt, Role};

use ResolutionOpt::{False as F, NotApplicable as N, True as T};

/// A joint resolution of a tuple's questions, in role order.
pub type OutcomeVector = Vec<ResolutionOpt>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConditionForm {
    Equality,
    Inequality,
}

pub fn condition_form(kind: CheckKind) -> ConditionForm {
    match kind {
        CheckKind::Consequence | CheckKind::And | CheckKind::Or => ConditionForm::Inequality,
        _ => ConditionForm::Equality,
    }
}

/// How a role resolves in base world `(p, q, r)`.
fn resolve(role: Role, p: bool, q: bool, r: bool) -> ResolutionOpt {
    let cond = |c: bool, v: bool| if c { ResolutionOpt::from(v) } else { N };
    match role {
        Role::P => p.into(),
        Role::NotP => (!p).into(),
        Role::Q => q.into(),
        Role::PAndQ => (p && q).into(),
        Role::POrQ => (p || q).into(),
        Role::NotPAndQ => (!p && q).into(),
        Role::QGivenP => cond(p, q),
        Role::RGivenPAndQ => cond(p && q, r),
        Role::PAndQAndR => (p && q && r).into(),
        Role::PGivenQ => cond(q, p),
        Role::PGivenNotQ => cond(!q, p),
    }
}

/// Extra constraint a check places on the base world beyond role semantics.
fn world_allowed(kind: CheckKind, p: bool, q: bool) -> bool {
    match kind {
        CheckKind::Paraphrase => p == q,
        CheckKind::Consequence => !p || q,
        _ => true,
    }
}

fn relation_holds(kind: CheckKind, states: &[ResolutionOpt]) -> bool {
    let roles = kind.roles();
    [false, true].into_iter().any(|p| {
        [false, true].into_iter().any(|q| {
            [false, true].into_iter().any(|r| {
                world_allowed(kind, p, q)
                    && roles
                        .iter()
                        .zip(states)
                        .all(|(&role, &s)| resolve(role, p, q, r) == s)
            })
        })
    })
}

fn enumerate(kind: CheckKind) -> Vec<OutcomeVector> {
    let n = kind.arity();
    let total = 3usize.pow(n as u32);
    (0..total)
        .map(|mut code| {
            (0..n)
                .map(|_| {
                    let s = ResolutionOpt::ALL[code % 3];
                    code /= 3;
                    s
                })
                .collect::<Vec<_>>()
        })
        .filter(|states| relation_holds(kind, states))
        .collect()
}

/// The consistent resolution vectors of `kind`, in a fixed order.
pub fn consistent_outcomes(kind: CheckKind) -> &'static [OutcomeVector] {
    static CACHE: OnceLock<Vec<Vec<OutcomeVector>>> = OnceLock::new();
    let all = CACHE.get_or_init(|| CheckKind::ALL.into_iter().map(enumerate).collect());
    &all[kind.index()]
}

pub fn resolution_consistent(kind: CheckKind, states: &[ResolutionOpt]) -> Result<bool> {
    kind.check_arity("states", states.len())?;
    Ok(consistent_outcomes(kind).iter().any(|w| w == states))
}

/// Signed residuals of the kind's condition. Equality kinds yield one
/// residual that must vanish; inequality kinds yield `lhs - rhs` terms that
/// must be `<= 0`.
fn residuals(kind: CheckKind, f: &[f64]) -> Vec<f64> {
    match kind {
        CheckKind::Negation => vec![f[0] + f[1] - 1.0],
        CheckKind::Paraphrase => vec![f[0] - f[1]],
        CheckKind::Consequence => vec![f[0] - f[1]],
        CheckKind::AndOr => vec![f[0] + f[1] - f[2] - f[3]],
        CheckKind::And => {
            let (a, b, c) = (f[0], f[1], f[2]);
            vec![(a + b - 1.0).max(0.0) - c, c - a.min(b)]
        }
        CheckKind::Or => {
            let (a, b, c) = (f[0], f[1], f[2]);
            vec![a.max(b) - c, c - (a + b).min(1.0)]
        }
        CheckKind::But => vec![f[0] + f[1] - f[2]],
        CheckKind::Cond => vec![f[0] * f[1] - f[2]],
        CheckKind::CondCond => vec![f[0] * f[1] * f[2] - f[3]],
        CheckKind::ExpEvidence => {
            let (p, q, pq, pnq) = (f[0], f[1], f[2], f[3]);
            vec![pq * q + pnq * (1.0 - q) - p]
        }
    }
}

/// Distance of `probs` from satisfying the kind's condition: the absolute
/// equality residual, or the largest inequality excess (0 when satisfied).
pub fn condition_residual(kind: CheckKind, probs: &[f64]) -> Result<f64> {
    kind.check_arity("probs", probs.len())?;
    let r = residuals(kind, probs);
    Ok(match condition_form(kind) {
        ConditionForm::Equality => r[0].abs(),
        ConditionForm::Inequality => r.into_iter().fold(0.0, f64::max),
    })
}

/// Whether `probs` satisfy the kind's condition within absolute tolerance `tol`.
pub fn is_consistent(kind: CheckKind, probs: &[f64], tol: f64) -> Result<bool> {
    Ok(condition_residual(kind, probs)? <= tol)
}

/// Degenerate forecast drawn from an outcome vector; N/A roles get `fill`.
pub fn degenerate_forecast(omega: &[ResolutionOpt], fill: f64) -> Vec<f64> {
    omega
        .iter()
        .map(|s| match s {
            T => 1.0,
            F => 0.0,
            N => fill,
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Error;

    fn sorted(mut v: Vec<OutcomeVector>) -> Vec<OutcomeVector> {
        v.sort();
        v
    }

    #[test]
    fn outcome_counts() {
        let expected = [2, 2, 3, 4, 4, 4, 3, 3, 4, 4];
        for (kind, n) in CheckKind::ALL.into_iter().zip(expected) {
            assert_eq!(consistent_outcomes(kind).len(), n, "{kind}");
        }
    }

    #[test]
    fn negation_outcomes() {
        assert_eq!(
            sorted(consistent_outcomes(CheckKind::Negation).to_vec()),
            sorted(vec![vec![T, F], vec![F, T]])
        );
    }

    #[test]
    fn cond_outcomes() {
        assert_eq!(
            sorted(consistent_outcomes(CheckKind::Cond).to_vec()),
            sorted(vec![vec![T, T, T], vec![T, F, F], vec![F, N, F]])
        );
    }

    #[test]
    fn condcond_outcomes() {
        assert_eq!(
            sorted(consistent_outcomes(CheckKind::CondCond).to_vec()),
            sorted(vec![
                vec![T, T, T, T],
                vec![T, T, F, F],
                vec![T, F, N, F],
                vec![F, N, N, F],
            ])
        );
    }

    #[test]
    fn consequence_excludes_p_without_q() {
        let omega = consistent_outcomes(CheckKind::Consequence);
        assert!(!omega.contains(&vec![T, F]));
        assert_eq!(omega.len(), 3);
    }

    #[test]
    fn membership_examples() {
        assert!(!resolution_consistent(CheckKind::Negation, &[T, T]).unwrap());
        assert!(resolution_consistent(CheckKind::But, &[F, T, T]).unwrap());
        assert!(resolution_consistent(CheckKind::ExpEvidence, &[T, T, T, N]).unwrap());
        assert!(!resolution_consistent(CheckKind::ExpEvidence, &[T, T, N, T]).unwrap());
        assert!(matches!(
            resolution_consistent(CheckKind::Negation, &[T]),
            Err(Error::ArityMismatch { .. })
        ));
    }

    #[test]
    fn membership_matches_enumeration_everywhere() {
        for kind in CheckKind::ALL {
            let n = kind.arity();
            let omega = consistent_outcomes(kind);
            for code in 0..3usize.pow(n as u32) {
                let mut c = code;
                let states: Vec<_> = (0..n)
                    .map(|_| {
                        let s = ResolutionOpt::ALL[c % 3];
                        c /= 3;
                        s
                    })
                    .collect();
                assert_eq!(
                    resolution_consistent(kind, &states).unwrap(),
                    omega.contains(&states)
                );
            }
        }
    }

    #[test]
    fn consistency_examples() {
        assert!(is_consistent(CheckKind::Negation, &[0.3, 0.7], 1e-9).unwrap());
        assert!(is_consistent(CheckKind::Cond, &[0.8, 0.5, 0.4], 1e-9).unwrap());
        assert!(!is_consistent(CheckKind::And, &[0.6, 0.7, 0.2], 1e-9).unwrap());
        assert!(is_consistent(CheckKind::Consequence, &[0.3, 0.8], 0.0).unwrap());
        assert!(!is_consistent(CheckKind::Consequence, &[0.8, 0.3], 0.0).unwrap());
        assert!(is_consistent(CheckKind::Or, &[0.3, 0.4, 0.5], 0.0).unwrap());
        assert!(!is_consistent(CheckKind::Or, &[0.3, 0.4, 0.8], 0.0).unwrap());
    }

    #[test]
    fn degenerate_forecasts_are_consistent() {
        for kind in CheckKind::ALL {
            for omega in consistent_outcomes(kind) {
                for fill in [0.0, 0.37, 1.0] {
                    let f = degenerate_forecast(omega, fill);
                    assert!(
                        is_consistent(kind, &f, 0.0).unwrap(),
                        "{kind} {omega:?} fill {fill}"
                    );
                }
            }
        }
    }
}
