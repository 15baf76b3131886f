//! The dependency-tracking benchmark: a long random chain of additions in `Q_2`.
//!
//! `x_1 = 1`, `x_2 = 2` and `x_i = x_{j_i} + x_{k_i}` for random `j_i, k_i < i`;
//! `y` is the sum of all `x_i`. The timed refine phase computes `y` to absolute
//! precision `2^n` for `n = 1..=epochs`. Every engine replays the same `(j_i, k_i)`.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use num_bigint::BigInt;
use num_rational::BigRational;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::approx::{PDig, PrimePowers};
use crate::epoch::{capacity, Engine};
use crate::error::{Error, Result};
use crate::exact::ExactField;
use crate::getters::{Universe, Variant};

/// Epoch whose approximation of `y` is hashed into `final_digest`.
pub const DIGEST_EPOCH: u32 = 8;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BenchEngine {
    Epoch,
    /// `y` rebuilt to depend on `x_1, x_2` only, intermediates still cached.
    EpochOpt,
    /// `y` rebuilt to depend on `x_1, x_2` only, intermediates inlined.
    EpochFast,
    GetterRestart,
    GetterChildren,
}

impl BenchEngine {
    pub const ALL: [BenchEngine; 5] = [
        BenchEngine::Epoch,
        BenchEngine::EpochOpt,
        BenchEngine::EpochFast,
        BenchEngine::GetterRestart,
        BenchEngine::GetterChildren,
    ];

    pub fn name(self) -> &'static str {
        match self {
            BenchEngine::Epoch => "epoch",
            BenchEngine::EpochOpt => "epoch-opt",
            BenchEngine::EpochFast => "epoch-fast",
            BenchEngine::GetterRestart => "getter-restart",
            BenchEngine::GetterChildren => "getter-children",
        }
    }
}

impl fmt::Display for BenchEngine {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for BenchEngine {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        BenchEngine::ALL
            .into_iter()
            .find(|e| e.name() == s)
            .ok_or_else(|| Error::Parse(format!("unknown engine {s:?}")))
    }
}

#[derive(Clone, Copy, Debug)]
pub struct BenchConfig {
    pub n: usize,
    pub epochs: u32,
    pub seed: u64,
    pub engine: BenchEngine,
}

#[derive(Clone, Debug)]
pub struct BenchReport {
    pub config: BenchConfig,
    pub construct_ms: f64,
    pub refine_ms: f64,
    /// Approximation-function calls (epoch engines) or applied updates (getter engines)
    /// during the refine phase.
    pub update_calls: u64,
    /// SHA-256 of `y` at absolute precision `2^DIGEST_EPOCH`.
    pub final_digest: String,
    /// SHA-256 of `y` at absolute precision `2^epochs`.
    pub top_digest: String,
}

impl BenchReport {
    pub fn to_json(&self) -> Value {
        json!({
            "engine": self.config.engine.name(),
            "n": self.config.n,
            "epochs": self.config.epochs,
            "seed": self.config.seed,
            "construct_ms": self.construct_ms,
            "refine_ms": self.refine_ms,
            "total_ms": self.construct_ms + self.refine_ms,
            "update_calls": self.update_calls,
            "final_digest": self.final_digest,
            "top_digest": self.top_digest,
        })
    }
}

/// The `(j_i, k_i)` for `i = 3..=n`, zero-based, drawn before anything is timed.
pub fn plan(n: usize, seed: u64) -> Vec<(usize, usize)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (2..n).map(|i| (rng.gen_range(0..i), rng.gen_range(0..i))).collect()
}

/// Hash of `d` truncated to absolute precision `k`.
pub fn digest(d: &PDig, k: i64, pp: &PrimePowers) -> Result<String> {
    let t = match d {
        PDig::Zero => PDig::weak(k),
        _ => d.with_abs(k, pp)?,
    };
    let text = match &t {
        PDig::Zero => unreachable!(),
        PDig::Num { v, r, u } => format!("p={};v={v};r={r};u={u:x}", pp.p()),
    };
    Ok(hex::encode(Sha256::digest(text.as_bytes())))
}

pub fn run(cfg: BenchConfig) -> Result<BenchReport> {
    if cfg.n < 2 || cfg.epochs == 0 {
        return Err(Error::Invalid("need n >= 2 and at least one epoch".into()));
    }
    let steps = plan(cfg.n, cfg.seed);
    match cfg.engine {
        BenchEngine::GetterRestart => run_getter(cfg, &steps, Variant::Restart),
        BenchEngine::GetterChildren => run_getter(cfg, &steps, Variant::Children),
        _ => run_epoch(cfg, &steps),
    }
}

fn ms(t: Instant) -> f64 {
    t.elapsed().as_secs_f64() * 1e3
}

fn run_epoch(cfg: BenchConfig, steps: &[(usize, usize)]) -> Result<BenchReport> {
    let top = cfg.epochs.max(DIGEST_EPOCH);
    let ctx = Engine::with_epoch_cap(top);
    let k = ExactField::prime(&ctx, 2)?;
    let t0 = Instant::now();
    let mut xs = vec![k.from_int(1)?, k.from_int(2)?];
    for &(j, l) in steps {
        let x = xs[j].add(&xs[l])?;
        xs.push(x);
    }
    let mut y = xs[0].clone();
    for x in &xs[1..] {
        y = y.add(x)?;
    }
    let y = match cfg.engine {
        BenchEngine::EpochOpt | BenchEngine::EpochFast => {
            let fast = cfg.engine == BenchEngine::EpochFast;
            let node = ctx.with_dependencies(y.node(), &[xs[0].node(), xs[1].node()], fast)?;
            k.wrap(node)
        }
        _ => y,
    };
    let construct_ms = ms(t0);
    let calls0 = ctx.stats().approx_calls;
    let t1 = Instant::now();
    for n in 1..=cfg.epochs {
        ctx.bring_to_epoch(y.node(), n)?;
    }
    let refine_ms = ms(t1);
    let update_calls = ctx.stats().approx_calls - calls0;
    let pp = PrimePowers::new(2);
    let at = |n: u32| -> Result<String> {
        let a = y.approx(n)?;
        digest(a.pdig().expect("prime field"), capacity(n) as i64, &pp)
    };
    Ok(BenchReport {
        config: cfg,
        construct_ms,
        refine_ms,
        update_calls,
        final_digest: at(DIGEST_EPOCH)?,
        top_digest: at(cfg.epochs)?,
    })
}

fn run_getter(cfg: BenchConfig, steps: &[(usize, usize)], variant: Variant) -> Result<BenchReport> {
    let u = Universe::new(2)?;
    u.set_variant(variant);
    let t0 = Instant::now();
    let one = BigRational::from_integer(BigInt::from(1));
    let two = BigRational::from_integer(BigInt::from(2));
    let mut xs = vec![u.constant(&one), u.constant(&two)];
    for &(j, l) in steps {
        let x = xs[j].add(&xs[l])?;
        xs.push(x);
    }
    let y = u.sum(&xs)?;
    let construct_ms = ms(t0);
    let before = u.counters().updates;
    let t1 = Instant::now();
    for n in 1..=cfg.epochs {
        y.increase_abs_prec(capacity(n) as i64)?;
    }
    let refine_ms = ms(t1);
    let update_calls = u.counters().updates - before;
    let at = |n: u32| -> Result<String> {
        let k = capacity(n) as i64;
        digest(&y.approximate(k)?, k, u.powers())
    };
    Ok(BenchReport {
        config: cfg,
        construct_ms,
        refine_ms,
        update_calls,
        final_digest: at(DIGEST_EPOCH)?,
        top_digest: at(cfg.epochs)?,
    })
}
