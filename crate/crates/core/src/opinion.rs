//! Scalar opinion dynamics: Bounded Confidence, Relative Agreement and
//! Relative Disagreement update rules over a fixed-size population.
//!
//! Opinions live on `[-1, +1]`. Each agent also carries an uncertainty which
//! acts as a half-width around its opinion for the RA and RD rules. Agents
//! whose opinion magnitude reaches `extreme_threshold` are extremists.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Lower bound applied to every uncertainty after an update.
pub const U_MIN: f64 = 1e-4;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OpinionError {
    #[error("population needs at least 2 agents, got {0}")]
    InvalidPopulation(usize),
    #[error("interaction pair must be two distinct agents (got {0}, {0})")]
    InvalidPair(usize),
    #[error("agent index {index} out of range for population of {len}")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("invalid opinion parameter: {0}")]
    InvalidParams(String),
    #[error("y metric undefined: no initially moderate agents")]
    UndefinedMetric,
    #[error("{0:?} rule cannot be applied to a population configured for {1:?}")]
    WrongModel(OdModel, OdModel),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OdModel {
    Bc,
    Ra,
    Rd,
}

/// Which sign the initial extremists take.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExtremistBias {
    /// Even split; an odd extremist goes positive.
    #[default]
    Balanced,
    Positive,
    Negative,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Opinion {
    pub value: f64,
    pub uncertainty: f64,
}

impl Opinion {
    pub fn new(value: f64, uncertainty: f64) -> Self {
        Self { value, uncertainty }
    }

    fn clamp(&mut self) {
        self.value = self.value.clamp(-1.0, 1.0);
        if !(self.uncertainty >= U_MIN) {
            self.uncertainty = U_MIN;
        }
    }

    fn lower(&self) -> f64 {
        self.value - self.uncertainty
    }

    fn upper(&self) -> f64 {
        self.value + self.uncertainty
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OdParams {
    pub model: OdModel,
    /// Convergence weight.
    pub mu: f64,
    pub bc_threshold: f64,
    /// Probability that a disagreement update fires (RD only).
    pub lambda: f64,
    /// Proportion of extremists at initialisation.
    pub pe: f64,
    pub uncertainty_range: [f64; 2],
    pub extreme_threshold: f64,
    pub extremist_bias: ExtremistBias,
    /// Uncertainty given to initial extremists; `uncertainty_range[0]` when
    /// unset.
    pub extremist_uncertainty: Option<f64>,
}

impl Default for OdParams {
    fn default() -> Self {
        Self {
            model: OdModel::Ra,
            mu: 0.5,
            bc_threshold: 0.2,
            lambda: 0.5,
            pe: 0.5,
            uncertainty_range: [0.2, 2.0],
            extreme_threshold: 0.9,
            extremist_bias: ExtremistBias::Balanced,
            extremist_uncertainty: None,
        }
    }
}

impl OdParams {
    pub fn validate(&self) -> Result<(), OpinionError> {
        let bad = |msg: String| Err(OpinionError::InvalidParams(msg));
        if !(self.mu > 0.0 && self.mu <= 0.5) {
            return bad(format!("mu = {} outside (0, 0.5]", self.mu));
        }
        if !(self.bc_threshold >= 0.0) {
            return bad(format!("bc_threshold = {} must be >= 0", self.bc_threshold));
        }
        if !(0.0..=1.0).contains(&self.lambda) {
            return bad(format!("lambda = {} outside [0, 1]", self.lambda));
        }
        if !(0.0..=1.0).contains(&self.pe) {
            return bad(format!("pe = {} outside [0, 1]", self.pe));
        }
        let [lo, hi] = self.uncertainty_range;
        if !(lo > 0.0 && lo <= hi && hi.is_finite()) {
            return bad(format!(
                "uncertainty_range = [{lo}, {hi}] must satisfy 0 < lo <= hi"
            ));
        }
        if let Some(ue) = self.extremist_uncertainty {
            if !(ue > 0.0 && ue.is_finite()) {
                return bad(format!("extremist_uncertainty = {ue} must be > 0"));
            }
        }
        if !(self.extreme_threshold > 0.0 && self.extreme_threshold <= 1.0) {
            return bad(format!(
                "extreme_threshold = {} outside (0, 1]",
                self.extreme_threshold
            ));
        }
        Ok(())
    }
}

/// Convergence regime read off the y metric.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Convergence {
    Central,
    Bipolar,
    SingleExtreme,
    Indeterminate,
}

impl std::fmt::Display for Convergence {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Convergence::Central => "central",
            Convergence::Bipolar => "bipolar",
            Convergence::SingleExtreme => "single_extreme",
            Convergence::Indeterminate => "indeterminate",
        };
        f.write_str(s)
    }
}

/// Upper edges of the Central, Bipolar and SingleExtreme bands.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvergenceBands {
    pub central_below: f64,
    pub bipolar_below: f64,
    pub single_extreme_below: f64,
}

impl Default for ConvergenceBands {
    fn default() -> Self {
        Self {
            central_below: 0.25,
            bipolar_below: 0.75,
            single_extreme_below: 1.25,
        }
    }
}

pub fn classify_convergence(y: f64) -> Convergence {
    classify_convergence_with(y, &ConvergenceBands::default())
}

pub fn classify_convergence_with(y: f64, bands: &ConvergenceBands) -> Convergence {
    if y < bands.central_below {
        Convergence::Central
    } else if y < bands.bipolar_below {
        Convergence::Bipolar
    } else if y < bands.single_extreme_below {
        Convergence::SingleExtreme
    } else {
        Convergence::Indeterminate
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OpinionPopulation {
    agents: Vec<Opinion>,
    extreme_threshold: f64,
    initial_snapshot: Vec<Opinion>,
}

impl OpinionPopulation {
    /// Builds a population directly from opinions; the snapshot is taken now.
    pub fn from_opinions(
        agents: Vec<Opinion>,
        extreme_threshold: f64,
    ) -> Result<Self, OpinionError> {
        if agents.len() < 2 {
            return Err(OpinionError::InvalidPopulation(agents.len()));
        }
        let mut agents = agents;
        agents.iter_mut().for_each(Opinion::clamp);
        Ok(Self {
            initial_snapshot: agents.clone(),
            agents,
            extreme_threshold,
        })
    }

    /// Restores a population from a recorded start and its current state,
    /// for example one read back from an opinions trace.
    pub fn resume(
        initial: Vec<Opinion>,
        current: Vec<Opinion>,
        extreme_threshold: f64,
    ) -> Result<Self, OpinionError> {
        if current.len() != initial.len() {
            return Err(OpinionError::InvalidPopulation(current.len()));
        }
        let mut pop = Self::from_opinions(initial, extreme_threshold)?;
        pop.agents = current;
        pop.agents.iter_mut().for_each(Opinion::clamp);
        Ok(pop)
    }

    /// Random initialisation with a `pe` share of extremists.
    ///
    /// Extremists sit uniformly on `[threshold, 1]` (or its mirror) with
    /// uncertainty `u_lo` (or `extremist_uncertainty` when set); moderates are uniform on `(-threshold, threshold)`
    /// with uncertainty uniform on the configured range. Extremist slots are
    /// shuffled across the population so they do not cluster by index.
    pub fn init<R: Rng + ?Sized>(
        n: usize,
        params: &OdParams,
        rng: &mut R,
    ) -> Result<Self, OpinionError> {
        if n < 2 {
            return Err(OpinionError::InvalidPopulation(n));
        }
        params.validate()?;
        let thr = params.extreme_threshold;
        let [u_lo, u_hi] = params.uncertainty_range;
        let u_ext = params.extremist_uncertainty.unwrap_or(u_lo);

        let n_ext = ((params.pe * n as f64).round() as usize).min(n);
        let (n_pos, n_neg) = match params.extremist_bias {
            ExtremistBias::Balanced => (n_ext - n_ext / 2, n_ext / 2),
            ExtremistBias::Positive => (n_ext, 0),
            ExtremistBias::Negative => (0, n_ext),
        };

        let mut signs: Vec<i8> = std::iter::repeat(1)
            .take(n_pos)
            .chain(std::iter::repeat(-1).take(n_neg))
            .chain(std::iter::repeat(0).take(n - n_ext))
            .collect();
        signs.shuffle(rng);

        let agents = signs
            .into_iter()
            .map(|sign| match sign {
                0 => {
                    let value = if thr > 0.0 {
                        draw_open(rng, -thr, thr)
                    } else {
                        0.0
                    };
                    Opinion::new(value, draw_closed(rng, u_lo, u_hi))
                }
                s => {
                    let magnitude = draw_closed(rng, thr, 1.0);
                    Opinion::new(f64::from(s) * magnitude, u_ext)
                }
            })
            .collect();

        Self::from_opinions(agents, thr)
    }

    pub fn len(&self) -> usize {
        self.agents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.agents.is_empty()
    }

    pub fn agents(&self) -> &[Opinion] {
        &self.agents
    }

    pub fn get(&self, index: usize) -> Option<&Opinion> {
        self.agents.get(index)
    }

    pub fn initial_snapshot(&self) -> &[Opinion] {
        &self.initial_snapshot
    }

    pub fn extreme_threshold(&self) -> f64 {
        self.extreme_threshold
    }

    pub fn is_extremist(&self, index: usize) -> bool {
        self.agents[index].value.abs() >= self.extreme_threshold
    }

    pub fn extremist_count(&self) -> usize {
        (0..self.len()).filter(|&i| self.is_extremist(i)).count()
    }

    pub fn mean_value(&self) -> f64 {
        self.agents.iter().map(|a| a.value).sum::<f64>() / self.len() as f64
    }

    fn check_pair(&self, i: usize, j: usize) -> Result<(), OpinionError> {
        let len = self.len();
        for index in [i, j] {
            if index >= len {
                return Err(OpinionError::IndexOutOfRange { index, len });
            }
        }
        if i == j {
            return Err(OpinionError::InvalidPair(i));
        }
        Ok(())
    }

    /// One synchronous Bounded Confidence step with equal weights over each
    /// agent's within-threshold neighbourhood (self included).
    pub fn bc_step(&mut self, params: &OdParams) -> Result<(), OpinionError> {
        if params.model != OdModel::Bc {
            return Err(OpinionError::WrongModel(OdModel::Bc, params.model));
        }
        let eps = params.bc_threshold;
        let old: Vec<f64> = self.agents.iter().map(|a| a.value).collect();
        for (agent, &xi) in self.agents.iter_mut().zip(&old) {
            let (sum, count) = old
                .iter()
                .filter(|&&xj| (xi - xj).abs() <= eps)
                .fold((0.0, 0usize), |(s, c), &xj| (s + xj, c + 1));
            agent.value = sum / count as f64;
            agent.clamp();
        }
        Ok(())
    }

    /// Relative Agreement: agent `i` influences agent `j` when their
    /// segments overlap by more than `u_i`.
    pub fn ra_interact(
        &mut self,
        i: usize,
        j: usize,
        params: &OdParams,
    ) -> Result<bool, OpinionError> {
        self.check_pair(i, j)?;
        if params.model != OdModel::Ra {
            return Err(OpinionError::WrongModel(OdModel::Ra, params.model));
        }
        Ok(self.apply_agreement(i, j, params.mu))
    }

    /// Relative Disagreement: when the gap between the segments exceeds
    /// `u_i`, agent `j` is pushed away from `i` with probability `lambda`.
    ///
    /// Consumes exactly one random draw when the gap condition holds and
    /// none otherwise.
    pub fn rd_interact<R: Rng + ?Sized>(
        &mut self,
        i: usize,
        j: usize,
        params: &OdParams,
        rng: &mut R,
    ) -> Result<bool, OpinionError> {
        self.check_pair(i, j)?;
        if params.model != OdModel::Rd {
            return Err(OpinionError::WrongModel(OdModel::Rd, params.model));
        }
        Ok(self.apply_disagreement(i, j, params.mu, params.lambda, rng))
    }

    /// One pairwise interaction under the configured model.
    ///
    /// RD populations also agree: overlap and gap are exclusive, so an
    /// overlapping pair takes the RA update and a distant pair the RD one.
    /// BC has no pairwise form; use [`OpinionPopulation::bc_step`].
    pub fn interact<R: Rng + ?Sized>(
        &mut self,
        i: usize,
        j: usize,
        params: &OdParams,
        rng: &mut R,
    ) -> Result<bool, OpinionError> {
        self.check_pair(i, j)?;
        match params.model {
            OdModel::Ra => Ok(self.apply_agreement(i, j, params.mu)),
            OdModel::Rd => {
                if self.apply_agreement(i, j, params.mu) {
                    Ok(true)
                } else {
                    Ok(self.apply_disagreement(i, j, params.mu, params.lambda, rng))
                }
            }
            OdModel::Bc => Err(OpinionError::WrongModel(params.model, OdModel::Ra)),
        }
    }

    /// Draws an ordered pair uniformly and applies [`Self::interact`].
    pub fn interact_random<R: Rng + ?Sized>(
        &mut self,
        params: &OdParams,
        rng: &mut R,
    ) -> Result<bool, OpinionError> {
        let (i, j) = draw_pair(self.len(), rng);
        self.interact(i, j, params, rng)
    }

    /// Advances the population by `steps` model steps: synchronous BC steps,
    /// or random ordered-pair interactions for RA / RD.
    pub fn evolve<R: Rng + ?Sized>(
        &mut self,
        params: &OdParams,
        steps: usize,
        rng: &mut R,
    ) -> Result<(), OpinionError> {
        for _ in 0..steps {
            match params.model {
                OdModel::Bc => self.bc_step(params)?,
                _ => {
                    self.interact_random(params, rng)?;
                }
            }
        }
        Ok(())
    }

    fn apply_agreement(&mut self, i: usize, j: usize, mu: f64) -> bool {
        let (a, b) = (self.agents[i], self.agents[j]);
        let overlap = a.upper().min(b.upper()) - a.lower().max(b.lower());
        if overlap <= a.uncertainty {
            return false;
        }
        let ra = overlap / a.uncertainty - 1.0;
        let target = &mut self.agents[j];
        target.value += mu * ra * (a.value - b.value);
        target.uncertainty += mu * ra * (a.uncertainty - b.uncertainty);
        target.clamp();
        true
    }

    fn apply_disagreement<R: Rng + ?Sized>(
        &mut self,
        i: usize,
        j: usize,
        mu: f64,
        lambda: f64,
        rng: &mut R,
    ) -> bool {
        let (a, b) = (self.agents[i], self.agents[j]);
        let gap = a.lower().max(b.lower()) - a.upper().min(b.upper());
        if gap <= a.uncertainty {
            return false;
        }
        let fires = rng.gen::<f64>() < lambda;
        if !fires {
            return false;
        }
        let rd = gap / a.uncertainty - 1.0;
        let target = &mut self.agents[j];
        target.value += mu * rd * (b.value - a.value);
        target.uncertainty += mu * rd * (b.uncertainty - a.uncertainty);
        target.clamp();
        true
    }

    /// `p+^2 + p-^2` over the agents that were moderate at construction.
    pub fn y_metric(&self) -> Result<f64, OpinionError> {
        let thr = self.extreme_threshold;
        let mut moderates = 0usize;
        let (mut pos, mut neg) = (0usize, 0usize);
        for (start, now) in self.initial_snapshot.iter().zip(&self.agents) {
            if start.value.abs() >= thr {
                continue;
            }
            moderates += 1;
            if now.value >= thr {
                pos += 1;
            } else if now.value <= -thr {
                neg += 1;
            }
        }
        if moderates == 0 {
            return Err(OpinionError::UndefinedMetric);
        }
        let p_pos = pos as f64 / moderates as f64;
        let p_neg = neg as f64 / moderates as f64;
        Ok(p_pos * p_pos + p_neg * p_neg)
    }

    /// Negates every current extremist. Returns how many were flipped.
    pub fn shift_extremists(&mut self) -> usize {
        let thr = self.extreme_threshold;
        let mut flipped = 0;
        for agent in self.agents.iter_mut().filter(|a| a.value.abs() >= thr) {
            agent.value = -agent.value;
            flipped += 1;
        }
        flipped
    }
}

/// Uniform ordered pair of distinct indices.
pub fn draw_pair<R: Rng + ?Sized>(n: usize, rng: &mut R) -> (usize, usize) {
    let i = rng.gen_range(0..n);
    let mut j = rng.gen_range(0..n - 1);
    if j >= i {
        j += 1;
    }
    (i, j)
}

fn draw_closed<R: Rng + ?Sized>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    if lo >= hi {
        lo
    } else {
        rng.gen_range(lo..=hi)
    }
}

fn draw_open<R: Rng + ?Sized>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    loop {
        let v = rng.gen_range(lo..hi);
        if v > lo {
            return v;
        }
    }
}
