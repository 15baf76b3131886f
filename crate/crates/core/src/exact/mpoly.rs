//! Square systems of multivariate polynomials: evaluation and Jacobians only.

use std::sync::Arc;

use num_rational::BigRational;

use super::field::{ExactElt, ExactField};
use crate::approx::{ApproxElt, ApproxField};
use crate::epoch::{Approx, NodeId};
use crate::error::{Error, Result};

/// A term is an exponent vector and its coefficient.
pub type Term<T> = (Vec<usize>, T);

#[derive(Clone, Debug)]
pub struct ExactMPolySystem {
    field: ExactField,
    rank: usize,
    equations: Vec<Vec<Term<ExactElt>>>,
}

/// One epoch's approximation of a system.
#[derive(Clone, Debug)]
pub struct ApproxSystem {
    pub field: Arc<ApproxField>,
    pub rank: usize,
    pub equations: Vec<Vec<Term<ApproxElt>>>,
}

impl ExactMPolySystem {
    pub fn new(field: &ExactField, rank: usize, equations: Vec<Vec<Term<ExactElt>>>) -> Result<Self> {
        if equations.len() != rank {
            return Err(Error::Invalid(format!("{} equations in {rank} variables", equations.len())));
        }
        let mut eqs = Vec::with_capacity(rank);
        for eq in equations {
            let mut terms = Vec::with_capacity(eq.len());
            for (exps, c) in eq {
                if exps.len() != rank {
                    return Err(Error::Invalid("exponent vector length differs from the rank".into()));
                }
                terms.push((exps, field.coerce(&c)?));
            }
            eqs.push(terms);
        }
        Ok(ExactMPolySystem { field: field.clone(), rank, equations: eqs })
    }

    pub fn from_rationals(field: &ExactField, rank: usize, equations: &[Vec<Term<BigRational>>]) -> Result<Self> {
        let eqs = equations
            .iter()
            .map(|eq| eq.iter().map(|(e, q)| Ok((e.clone(), field.from_rational(q)?))).collect::<Result<Vec<_>>>())
            .collect::<Result<Vec<_>>>()?;
        Self::new(field, rank, eqs)
    }

    pub fn field(&self) -> &ExactField {
        &self.field
    }
    pub fn rank(&self) -> usize {
        self.rank
    }
    pub fn equations(&self) -> &[Vec<Term<ExactElt>>] {
        &self.equations
    }

    /// Coefficient nodes in equation-major order.
    pub fn coeff_nodes(&self) -> Vec<NodeId> {
        self.equations.iter().flat_map(|eq| eq.iter().map(|(_, c)| c.node())).collect()
    }

    /// Rebuilds the approximate system from coefficient approximations listed as in
    /// [`coeff_nodes`](Self::coeff_nodes).
    pub fn approx_from(&self, field: &Arc<ApproxField>, coeffs: &[&Approx]) -> Result<ApproxSystem> {
        let mut it = coeffs.iter();
        let mut eqs = Vec::with_capacity(self.rank);
        for eq in &self.equations {
            let mut terms = Vec::with_capacity(eq.len());
            for (e, _) in eq {
                let c = it.next().ok_or_else(|| Error::Invalid("too few coefficients".into()))?;
                terms.push((e.clone(), c.as_elt()?.clone()));
            }
            eqs.push(terms);
        }
        Ok(ApproxSystem { field: field.clone(), rank: self.rank, equations: eqs })
    }

    pub fn approx(&self, n: u32) -> Result<ApproxSystem> {
        let ctx = self.field.ctx();
        let field = self.field.approx(n)?;
        let apps = self
            .coeff_nodes()
            .into_iter()
            .map(|c| ctx.epoch_approximation(c, n))
            .collect::<Result<Vec<_>>>()?;
        let refs: Vec<&Approx> = apps.iter().map(|a| a.as_ref()).collect();
        self.approx_from(&field, &refs)
    }
}

fn monomial(x: &[ApproxElt], exps: &[usize], field: &Arc<ApproxField>) -> Result<ApproxElt> {
    let mut acc = ApproxElt::one(field);
    for (xi, &k) in x.iter().zip(exps) {
        if k > 0 {
            acc = acc.mul(&xi.pow(k as i64)?)?;
        }
    }
    Ok(acc)
}

impl ApproxSystem {
    pub fn eval(&self, x: &[ApproxElt]) -> Result<Vec<ApproxElt>> {
        self.equations
            .iter()
            .map(|eq| {
                let mut acc = ApproxElt::zero(&self.field);
                for (e, c) in eq {
                    acc = acc.add(&c.mul(&monomial(x, e, &self.field)?)?)?;
                }
                Ok(acc)
            })
            .collect()
    }

    /// `J[i][j] = ∂f_i/∂x_j`.
    pub fn jacobian(&self, x: &[ApproxElt]) -> Result<Vec<Vec<ApproxElt>>> {
        let mut jac = vec![vec![ApproxElt::zero(&self.field); self.rank]; self.rank];
        for (i, eq) in self.equations.iter().enumerate() {
            for (e, c) in eq {
                for j in 0..self.rank {
                    if e[j] == 0 {
                        continue;
                    }
                    let mut d = e.clone();
                    d[j] -= 1;
                    let t = c.mul(&monomial(x, &d, &self.field)?)?.mul(&ApproxElt::from_int(&self.field, e[j] as i64))?;
                    jac[i][j] = jac[i][j].add(&t)?;
                }
            }
        }
        Ok(jac)
    }
}
