//! Two-player race model: when does defecting from a compute agreement pay?
//!
//! Utilities are `u_c` for mutual cooperation, `u_w` for winning a race and
//! 0 for losing it or for catastrophe. A defector wins with probability
//! `p_w_given_d` if the race does not end in catastrophe (`p_doom`).
//!
//! Note that at `u_w = 1.5, p_doom = 0.1` the threshold is `0.7407...`, so a
//! defector win chance of exactly 0.75 is already on the unstable side.

use std::io;

use schemars::JsonSchema;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StabilityError {
    #[error("{name} = {value} is out of range")]
    OutOfRange { name: &'static str, value: f64 },
    #[error("bad grid: {0}")]
    BadGrid(String),
}

fn check_prob(name: &'static str, value: f64) -> Result<(), StabilityError> {
    if (0.0..=1.0).contains(&value) {
        Ok(())
    } else {
        Err(StabilityError::OutOfRange { name, value })
    }
}

fn check_positive(name: &'static str, value: f64) -> Result<(), StabilityError> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(StabilityError::OutOfRange { name, value })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct StabilityParams {
    #[serde(default = "one")]
    pub u_c: f64,
    pub u_w: f64,
    pub p_doom: f64,
    pub p_w_given_d: f64,
}

fn one() -> f64 {
    1.0
}

impl StabilityParams {
    /// Parameters with `u_c = 1`.
    pub fn new(u_w: f64, p_doom: f64, p_w_given_d: f64) -> Result<Self, StabilityError> {
        StabilityParams {
            u_c: 1.0,
            u_w,
            p_doom,
            p_w_given_d,
        }
        .validated()
    }

    pub fn with_u_c(mut self, u_c: f64) -> Result<Self, StabilityError> {
        self.u_c = u_c;
        self.validated()
    }

    pub fn validated(self) -> Result<Self, StabilityError> {
        check_positive("u_c", self.u_c)?;
        check_positive("u_w", self.u_w)?;
        check_prob("p_doom", self.p_doom)?;
        check_prob("p_w_given_d", self.p_w_given_d)?;
        Ok(self)
    }

    /// Expected value of a race, before splitting by who wins.
    fn race_value(&self) -> f64 {
        self.u_w * (1.0 - self.p_doom)
    }
}

pub fn defector_payoff(p: &StabilityParams) -> f64 {
    p.race_value() * p.p_w_given_d
}

pub fn second_mover_payoff(p: &StabilityParams) -> f64 {
    p.race_value() * (1.0 - p.p_w_given_d)
}

/// Strict: a defector payoff equal to `u_c` is unstable.
pub fn is_stable(p: &StabilityParams) -> bool {
    defector_payoff(p) < p.u_c
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ThresholdResult {
    /// Stable whatever the defector's win probability.
    Unconditional,
    /// Stable iff `p_w_given_d` is strictly below the value.
    Bounded(f64),
}

impl ThresholdResult {
    pub fn value(self) -> Option<f64> {
        match self {
            ThresholdResult::Unconditional => None,
            ThresholdResult::Bounded(t) => Some(t),
        }
    }
}

/// Largest defector win probability compatible with stability at `u_c = 1`.
pub fn pwd_threshold(u_w: f64, p_doom: f64) -> Result<ThresholdResult, StabilityError> {
    check_positive("u_w", u_w)?;
    check_prob("p_doom", p_doom)?;
    let t = 1.0 / (u_w * (1.0 - p_doom));
    Ok(if t >= 1.0 {
        ThresholdResult::Unconditional
    } else {
        ThresholdResult::Bounded(t)
    })
}

/// Infimum of the `p_doom` values that make cooperation stable at `u_c = 1`.
/// Stability holds strictly above it.
pub fn min_stable_pdoom(u_w: f64, p_w_given_d: f64) -> Result<f64, StabilityError> {
    check_positive("u_w", u_w)?;
    check_positive("p_w_given_d", p_w_given_d)?;
    check_prob("p_w_given_d", p_w_given_d)?;
    Ok((1.0 - 1.0 / (u_w * p_w_given_d)).max(0.0))
}

/// The stability boundary `(u_w, p_doom)` for a fixed defector win chance.
pub fn boundary_curve(p_w_given_d: f64, u_w_grid: &[f64]) -> Result<Vec<(f64, f64)>, StabilityError> {
    u_w_grid
        .iter()
        .map(|&u| Ok((u, min_stable_pdoom(u, p_w_given_d)?)))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Action {
    Cooperate,
    Defect,
}

impl Action {
    fn idx(self) -> usize {
        match self {
            Action::Cooperate => 0,
            Action::Defect => 1,
        }
    }
}

/// `cells[row][col] = (row payoff, column payoff)`, Cooperate first.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PayoffMatrix {
    pub cells: [[(f64, f64); 2]; 2],
}

impl PayoffMatrix {
    pub fn get(&self, row: Action, col: Action) -> (f64, f64) {
        self.cells[row.idx()][col.idx()]
    }

    /// Row payoff of playing `mine` against `theirs`.
    fn row(&self, mine: usize, theirs: usize) -> f64 {
        self.cells[mine][theirs].0
    }

    /// Column payoff of playing `mine` against row action `theirs`.
    fn col(&self, mine: usize, theirs: usize) -> f64 {
        self.cells[theirs][mine].1
    }

    /// Weak Nash test for the profile `(r, c)`.
    fn is_equilibrium(&self, r: usize, c: usize) -> bool {
        self.row(r, c) >= self.row(1 - r, c) && self.col(c, r) >= self.col(1 - c, r)
    }
}

/// `s` is the chance that the row player wins when both defect together.
pub fn payoff_matrix(p: &StabilityParams, s: f64) -> Result<PayoffMatrix, StabilityError> {
    check_prob("simultaneous_win_prob", s)?;
    let d = defector_payoff(p);
    let m = second_mover_payoff(p);
    let v = p.race_value();
    Ok(PayoffMatrix {
        cells: [
            [(p.u_c, p.u_c), (m, d)],
            [(d, m), (v * s, v * (1.0 - s))],
        ],
    })
}

pub const DEFAULT_SIMULTANEOUS_WIN_PROB: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GameClass {
    StagHunt,
    DefectionDominant,
    Other,
}

/// Weak inequalities decide equilibrium membership. A game whose every
/// outcome other than mutual cooperation is worth nothing to both players
/// is reported as `Other`.
pub fn classify_game(m: &PayoffMatrix) -> GameClass {
    let (c, d) = (0, 1);
    let dead = [(c, d), (d, c), (d, d)]
        .iter()
        .all(|&(r, k)| m.cells[r][k] == (0.0, 0.0));
    if dead {
        return GameClass::Other;
    }
    if m.is_equilibrium(c, c) && m.is_equilibrium(d, d) {
        return GameClass::StagHunt;
    }
    let row_dom = m.row(d, c) > m.row(c, c) && m.row(d, d) > m.row(c, d);
    let col_dom = m.col(d, c) > m.col(c, c) && m.col(d, d) > m.col(c, d);
    if row_dom && col_dom {
        GameClass::DefectionDominant
    } else {
        GameClass::Other
    }
}

/// Would a leader with win chance `leader_pwd` accept `u_c_offer` for
/// cooperating?
pub fn entry_gate(leader_pwd: f64, p: &StabilityParams, u_c_offer: f64) -> Result<bool, StabilityError> {
    Ok(minimal_concession(leader_pwd, p)? < u_c_offer)
}

/// Infimum cooperation utility the leader must be offered.
pub fn minimal_concession(leader_pwd: f64, p: &StabilityParams) -> Result<f64, StabilityError> {
    check_prob("leader_pwd", leader_pwd)?;
    Ok(p.race_value() * leader_pwd)
}

/// Maps a head start to a defector win probability.
///
/// With `f = lead / race` this is a logistic in `f` rescaled so that `f = 0`
/// gives exactly 0.5 and `f = 1` gives exactly 1:
/// `0.5 + 0.5 * (σ(k f) - 0.5) / (σ(k) - 0.5)`. Larger `sharpness` (`k`)
/// saturates earlier. A zero-length race counts as no lead.
pub fn pwd_from_lead(lead_ticks: u64, race_ticks: u64, sharpness: f64) -> Result<f64, StabilityError> {
    check_positive("sharpness", sharpness)?;
    if lead_ticks > race_ticks {
        return Err(StabilityError::OutOfRange {
            name: "lead_ticks",
            value: lead_ticks as f64,
        });
    }
    if race_ticks == 0 {
        return Ok(0.5);
    }
    let sigma = |x: f64| 1.0 / (1.0 + (-x).exp());
    let f = lead_ticks as f64 / race_ticks as f64;
    let p = 0.5 + 0.5 * (sigma(sharpness * f) - 0.5) / (sigma(sharpness) - 0.5);
    Ok(p.clamp(0.5, 1.0))
}

/// `n` evenly spaced points from `a` to `b` inclusive.
pub fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![a],
        _ => (0..n)
            .map(|i| a + (b - a) * i as f64 / (n - 1) as f64)
            .collect(),
    }
}

/// Parses `a:b:n` into `linspace(a, b, n)`.
pub fn parse_grid(spec: &str) -> Result<Vec<f64>, StabilityError> {
    let bad = || StabilityError::BadGrid(spec.to_string());
    let parts: Vec<&str> = spec.split(':').collect();
    let [a, b, n] = parts.as_slice() else {
        return Err(bad());
    };
    let a: f64 = a.trim().parse().map_err(|_| bad())?;
    let b: f64 = b.trim().parse().map_err(|_| bad())?;
    let n: usize = n.trim().parse().map_err(|_| bad())?;
    if n == 0 || !a.is_finite() || !b.is_finite() {
        return Err(bad());
    }
    Ok(linspace(a, b, n))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub u_w: f64,
    pub p_doom: f64,
    pub p_w_given_d: f64,
    pub defector_payoff: f64,
    pub stable: bool,
}

impl SweepRow {
    pub fn eval(p: &StabilityParams) -> Self {
        SweepRow {
            u_w: p.u_w,
            p_doom: p.p_doom,
            p_w_given_d: p.p_w_given_d,
            defector_payoff: defector_payoff(p),
            stable: is_stable(p),
        }
    }
}

/// Grid in row-major order: `u_w` outer, then `p_doom`, then `p_w_given_d`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct SweepGrid {
    #[serde(default = "one")]
    pub u_c: f64,
    pub u_w: Vec<f64>,
    pub p_doom: Vec<f64>,
    pub p_w_given_d: Vec<f64>,
}

pub fn sweep(grid: &SweepGrid) -> Result<Vec<SweepRow>, StabilityError> {
    let mut rows = Vec::with_capacity(grid.u_w.len() * grid.p_doom.len() * grid.p_w_given_d.len());
    for &u_w in &grid.u_w {
        for &p_doom in &grid.p_doom {
            for &pwd in &grid.p_w_given_d {
                let p = StabilityParams::new(u_w, p_doom, pwd)?.with_u_c(grid.u_c)?;
                rows.push(SweepRow::eval(&p));
            }
        }
    }
    Ok(rows)
}

/// Columns: `u_w,p_doom,p_w_given_d,defector_payoff,stable`.
pub fn write_sweep_csv<W: io::Write>(rows: &[SweepRow], out: W) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["u_w", "p_doom", "p_w_given_d", "defector_payoff", "stable"])?;
    for r in rows {
        w.write_record([
            r.u_w.to_string(),
            r.p_doom.to_string(),
            r.p_w_given_d.to_string(),
            r.defector_payoff.to_string(),
            r.stable.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Columns: `u_w,p_doom`.
pub fn write_boundary_csv<W: io::Write>(points: &[(f64, f64)], out: W) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["u_w", "p_doom"])?;
    for (u, p) in points {
        w.write_record([u.to_string(), p.to_string()])?;
    }
    w.flush()?;
    Ok(())
}
