//! Parsing and rendering of command-line inputs.

use num_rational::BigRational;
use padic_core::approx::FieldKind;
use padic_core::epoch::{Ctx, Engine};
use padic_core::exact::{ExactField, ExactPoly};
use padic_core::val::{fmt_rational, parse_rational};
use padic_core::{Error, Result};

/// A comma-separated list of rationals, constant term first.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Coeffs(pub Vec<BigRational>);

impl Coeffs {
    pub fn parse(s: &str) -> Result<Coeffs> {
        if s.trim().is_empty() {
            return Err(Error::Parse("empty coefficient list".into()));
        }
        s.split(',').map(parse_rational).collect::<Result<_>>().map(Coeffs)
    }

    /// Canonical form: reduced fractions, no spaces.
    pub fn render(&self) -> String {
        self.0.iter().map(fmt_rational).collect::<Vec<_>>().join(",")
    }
}

/// Where a computation happens: `Q_p`, optionally extended by an inertial and
/// then an Eisenstein polynomial.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Tower {
    pub p: u64,
    pub inert: Option<Coeffs>,
    pub eisenstein: Option<Coeffs>,
}

impl Tower {
    pub fn render(&self) -> String {
        let mut s = format!("Q{}", self.p);
        if let Some(c) = &self.inert {
            s.push_str(&format!(" / inert [{}]", c.render()));
        }
        if let Some(c) = &self.eisenstein {
            s.push_str(&format!(" / eisenstein [{}]", c.render()));
        }
        s
    }

    pub fn build(&self, ctx: &Ctx) -> Result<ExactField> {
        let mut k = ExactField::prime(ctx, self.p)?;
        for (cs, kind) in [(&self.inert, FieldKind::Inert), (&self.eisenstein, FieldKind::Eisen)] {
            if let Some(cs) = cs {
                let f = ExactPoly::from_rationals(&k, &cs.0)?;
                k = ExactField::extension(&f, kind)?;
            }
        }
        Ok(k)
    }
}

/// Everything one invocation needs besides the subcommand's own switches.
#[derive(Clone, Debug)]
pub struct JobSpec {
    pub tower: Tower,
    pub poly: Option<Coeffs>,
    pub max_epoch: u32,
}

impl JobSpec {
    pub fn engine(&self) -> Ctx {
        Engine::with_epoch_cap(self.max_epoch)
    }

    pub fn render(&self) -> String {
        let mut s = format!("{} max_epoch={}", self.tower.render(), self.max_epoch);
        if let Some(f) = &self.poly {
            s.push_str(&format!(" f=[{}]", f.render()));
        }
        s
    }
}
