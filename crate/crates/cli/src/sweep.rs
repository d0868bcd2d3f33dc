//! Parameter sweeps emitted as CSV.

use std::io::Write;

use clap::ValueEnum;
use qkdnet::combinatorics::p_success_approx;
use qkdnet::scalar::exact_from_f64;
use qkdnet::security::{epsilon1_approx, epsilon1_exact, epsilon2_approx, epsilon2_exact};
use qkdnet::{make_segment, Error, ExactProbability, Result, Scalar};

use crate::output::{csv_writer, fmt_sig};

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Param {
    P,
    #[value(name = "eps_auth")]
    EpsAuth,
    #[value(name = "eps_qkd")]
    EpsQkd,
    C,
    #[value(name = "N")]
    N,
}

impl Param {
    fn column(self) -> &'static str {
        match self {
            Param::P => "p",
            Param::EpsAuth => "eps_auth",
            Param::EpsQkd => "eps_qkd",
            Param::C => "c",
            Param::N => "N",
        }
    }

    fn is_integer(self) -> bool {
        matches!(self, Param::C | Param::N)
    }

    /// Quantity analyzed when none is given.
    fn default_quantity(self) -> Quantity {
        match self {
            Param::EpsAuth => Quantity::Eps1,
            Param::EpsQkd => Quantity::Eps2,
            _ => Quantity::PS,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Quantity {
    /// Node-attack success probability at compromise probability `p`.
    #[value(name = "p_s")]
    PS,
    Eps1,
    Eps2,
    #[value(name = "eps_qn")]
    EpsQn,
}

impl Quantity {
    fn column(self) -> &'static str {
        match self {
            Quantity::PS => "p_s",
            Quantity::Eps1 => "eps1",
            Quantity::Eps2 => "eps2",
            Quantity::EpsQn => "eps_qn",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Spacing {
    Log,
    Linear,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Arith {
    F64,
    Exact,
}

#[derive(Clone, Debug)]
pub struct SweepSpec {
    pub param: Param,
    pub quantity: Option<Quantity>,
    pub start: f64,
    pub stop: f64,
    pub points: usize,
    pub spacing: Spacing,
    pub n: usize,
    pub c: usize,
    pub p: f64,
    pub eps_auth: f64,
    pub eps_qkd: f64,
    pub arith: Arith,
}

/// Fixed values with the swept one substituted.
#[derive(Clone, Copy, Debug)]
struct Point {
    n: usize,
    c: usize,
    p: f64,
    eps_auth: f64,
    eps_qkd: f64,
}

impl SweepSpec {
    pub fn quantity(&self) -> Quantity {
        self.quantity.unwrap_or(self.param.default_quantity())
    }

    pub fn header(&self) -> [String; 4] {
        let q = self.quantity().column();
        [
            self.param.column().to_string(),
            format!("{q}_exact"),
            format!("{q}_approx"),
            "regime_valid".to_string(),
        ]
    }

    pub fn validate(&self) -> Result<()> {
        if self.start.partial_cmp(&self.stop) != Some(std::cmp::Ordering::Less) {
            return Err(Error::InvalidParameter {
                name: "start",
                value: self.start.to_string(),
                bound: format!("start < stop = {}", self.stop),
            });
        }
        if self.points < 2 {
            return Err(Error::InvalidParameter {
                name: "points",
                value: self.points.to_string(),
                bound: "points >= 2".into(),
            });
        }
        if self.spacing == Spacing::Log && self.start <= 0.0 {
            return Err(Error::InvalidParameter {
                name: "start",
                value: self.start.to_string(),
                bound: "start > 0 for log spacing".into(),
            });
        }
        Ok(())
    }

    pub fn grid(&self) -> Vec<f64> {
        let last = (self.points - 1) as f64;
        (0..self.points)
            .map(|i| {
                let t = i as f64 / last;
                let x = match self.spacing {
                    Spacing::Linear => self.start + t * (self.stop - self.start),
                    Spacing::Log => (self.start.ln() + t * (self.stop / self.start).ln()).exp(),
                };
                // Pin the endpoints against exp/ln round-off.
                let x = if i == 0 {
                    self.start
                } else if i == self.points - 1 {
                    self.stop
                } else {
                    x
                };
                if self.param.is_integer() {
                    x.round()
                } else {
                    x
                }
            })
            .collect()
    }

    fn point(&self, x: f64) -> Result<Point> {
        let mut pt = Point {
            n: self.n,
            c: self.c,
            p: self.p,
            eps_auth: self.eps_auth,
            eps_qkd: self.eps_qkd,
        };
        let as_count = |name: &'static str| -> Result<usize> {
            if x >= 0.0 && x.fract() == 0.0 {
                Ok(x as usize)
            } else {
                Err(Error::InvalidParameter {
                    name,
                    value: x.to_string(),
                    bound: "non-negative integer".into(),
                })
            }
        };
        match self.param {
            Param::P => pt.p = x,
            Param::EpsAuth => pt.eps_auth = x,
            Param::EpsQkd => pt.eps_qkd = x,
            Param::C => pt.c = as_count("c")?,
            Param::N => pt.n = as_count("N")?,
        }
        Ok(pt)
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        self.validate()?;
        let rows = self
            .grid()
            .into_iter()
            .map(|x| {
                let pt = self.point(x)?;
                let (exact, approx, valid) = match self.arith {
                    Arith::F64 => evaluate::<f64>(self.quantity(), &pt, &Some)?,
                    Arith::Exact => evaluate::<ExactProbability>(self.quantity(), &pt, &exact_from_f64)?,
                };
                Ok([fmt_sig(x), fmt_sig(exact), fmt_sig(approx), valid.to_string()])
            })
            .collect::<Result<Vec<_>>>()?;
        let mut out = csv_writer(w);
        let io = |e: csv::Error| Error::Inconsistency(format!("writing CSV: {e}"));
        out.write_record(self.header()).map_err(io)?;
        for row in rows {
            out.write_record(row).map_err(io)?;
        }
        out.flush().map_err(|e| Error::Inconsistency(format!("writing CSV: {e}")))?;
        Ok(())
    }
}

/// `(exact, approx, regime_valid)` at one grid point, as `f64`.
fn evaluate<T: Scalar>(
    q: Quantity,
    pt: &Point,
    lift: &dyn Fn(f64) -> Option<T>,
) -> Result<(f64, f64, bool)> {
    let value = |name: &'static str, x: f64| {
        lift(x).ok_or_else(|| Error::InvalidParameter {
            name,
            value: x.to_string(),
            bound: "finite".into(),
        })
    };
    let seg = make_segment(pt.n, pt.c)?;
    match q {
        Quantity::PS => {
            let a = p_success_approx(pt.n, pt.c, &value("p", pt.p)?)?;
            Ok((a.exact.as_f64(), a.approx.as_f64(), a.regime_valid))
        }
        Quantity::Eps1 => {
            let e = value("eps_auth", pt.eps_auth)?;
            let a = epsilon1_approx(&seg, &e)?;
            Ok((epsilon1_exact(&seg, &e)?.as_f64(), a.value.as_f64(), a.regime_valid))
        }
        Quantity::Eps2 => {
            let e = value("eps_qkd", pt.eps_qkd)?;
            let a = epsilon2_approx(&seg, &e)?;
            Ok((epsilon2_exact(&seg, &e)?.as_f64(), a.value.as_f64(), a.regime_valid))
        }
        Quantity::EpsQn => {
            let (e1, e2) = (evaluate(Quantity::Eps1, pt, lift)?, evaluate(Quantity::Eps2, pt, lift)?);
            Ok((e1.0 + e2.0, e1.1 + e2.1, e1.2 && e2.2))
        }
    }
}
