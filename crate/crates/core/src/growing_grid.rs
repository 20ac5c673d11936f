//! Growing grid: a 2×2 lattice that inserts whole rows or columns where
//! neurons win most often, then fine-tunes at fixed size.

use std::fmt::Write as _;

use crate::lattice::{Decay, Lattice, NetError, NeuronMap, WinnerResult};
use crate::scalar::{sq_dist, Real};

/// Insertion interval λ, counted in input signals.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LambdaMode {
    /// Half the number of signals in one epoch.
    Middle,
    Fixed(usize),
}

pub fn resolve_lambda(mode: LambdaMode, epoch_signal_count: usize) -> usize {
    match mode {
        LambdaMode::Middle => (epoch_signal_count / 2).max(1),
        LambdaMode::Fixed(k) => k,
    }
}

#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig<T> {
    /// Activity exponential factor σ.
    pub sigma: T,
    /// Constant growth-phase learning rate.
    pub alpha0: T,
    pub lambda: LambdaMode,
    /// Neuron count that ends growth.
    pub gamma: usize,
    pub finetune_epochs: usize,
    pub finetune_alpha: Decay<T>,
    /// Contrast exponent applied to exported activity maps.
    pub softmax_exp: T,
    pub seed: u64,
}

impl<T: Real> Default for GridConfig<T> {
    fn default() -> Self {
        GridConfig {
            sigma: T::lit(1.0e6),
            alpha0: T::lit(0.1),
            lambda: LambdaMode::Middle,
            gamma: 900,
            finetune_epochs: 50,
            finetune_alpha: Decay {
                start: T::lit(0.1),
                end: T::lit(0.001),
            },
            softmax_exp: T::lit(10.0),
            seed: 0,
        }
    }
}

impl<T: Real> GridConfig<T> {
    pub fn validate(&self) -> Result<(), NetError> {
        let bad = |m: String| Err(NetError::InvalidConfig(m));
        if !(self.sigma > T::zero() && self.sigma.is_finite()) {
            return bad(format!("sigma must be positive, got {}", self.sigma));
        }
        if !(self.alpha0 > T::zero() && self.alpha0 <= T::one()) {
            return bad(format!("alpha0 must lie in (0, 1], got {}", self.alpha0));
        }
        if self.gamma < 4 {
            return bad(format!("gamma must be at least 4, got {}", self.gamma));
        }
        if self.lambda == LambdaMode::Fixed(0) {
            return bad("fixed lambda must be positive".into());
        }
        if !(self.softmax_exp > T::zero() && self.softmax_exp.is_finite()) {
            return bad(format!(
                "softmax_exp must be positive, got {}",
                self.softmax_exp
            ));
        }
        self.finetune_alpha.validate("fine-tune alpha")
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Phase {
    Growth,
    FineTune,
    Frozen,
}

impl Phase {
    pub fn name(self) -> &'static str {
        match self {
            Phase::Growth => "growth",
            Phase::FineTune => "finetune",
            Phase::Frozen => "frozen",
        }
    }

    pub fn from_name(s: &str) -> Option<Phase> {
        match s {
            "growth" => Some(Phase::Growth),
            "finetune" => Some(Phase::FineTune),
            "frozen" => Some(Phase::Frozen),
            _ => None,
        }
    }
}

/// One insertion check: the largest local counter of the closing interval
/// and the lattice shape after the check.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct IntervalRecord {
    pub interval: usize,
    pub max_counter: u64,
    pub rows: usize,
    pub cols: usize,
    pub inserted: bool,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GrowthReport {
    pub intervals: Vec<IntervalRecord>,
    pub rows: usize,
    pub cols: usize,
    pub signals: usize,
}

impl GrowthReport {
    pub fn insertions(&self) -> usize {
        self.intervals.iter().filter(|r| r.inserted).count()
    }

    pub fn max_counter_trace(&self) -> Vec<u64> {
        self.intervals.iter().map(|r| r.max_counter).collect()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("interval,max_lc,rows,cols\n");
        for r in &self.intervals {
            writeln!(
                out,
                "{},{},{},{}",
                r.interval, r.max_counter, r.rows, r.cols
            )
            .unwrap();
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FinetuneReport<T> {
    /// Mean winner distance per epoch, measured while training.
    pub quantization_error: Vec<T>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GrowingGrid<T> {
    pub config: GridConfig<T>,
    lattice: Lattice<T>,
    counters: Vec<u64>,
    phase: Phase,
    signals_since_insertion: usize,
    lambda: Option<usize>,
    finetune_step: usize,
    finetune_horizon: usize,
    intervals: Vec<IntervalRecord>,
}

impl<T: Real> NeuronMap<T> for GrowingGrid<T> {
    fn lattice(&self) -> &Lattice<T> {
        &self.lattice
    }

    fn sigma(&self) -> T {
        self.config.sigma
    }
}

impl<T: Real> GrowingGrid<T> {
    pub fn init(config: GridConfig<T>, input_dim: usize) -> Result<Self, NetError> {
        config.validate()?;
        if input_dim == 0 {
            return Err(NetError::InvalidConfig(
                "input dimension must be at least 1".into(),
            ));
        }
        let lattice = Lattice::random(2, 2, input_dim, config.seed);
        Ok(GrowingGrid {
            config,
            lattice,
            counters: vec![0; 4],
            phase: Phase::Growth,
            signals_since_insertion: 0,
            lambda: None,
            finetune_step: 0,
            finetune_horizon: 0,
            intervals: Vec::new(),
        })
    }

    /// Rebuilds a net in a given phase from stored weights; counters start at zero.
    pub fn from_parts(
        config: GridConfig<T>,
        lattice: Lattice<T>,
        phase: Phase,
    ) -> Result<Self, NetError> {
        config.validate()?;
        if lattice.rows() < 2 || lattice.cols() < 2 {
            return Err(NetError::InvalidConfig("grid must be at least 2x2".into()));
        }
        let n = lattice.len();
        Ok(GrowingGrid {
            config,
            lattice,
            counters: vec![0; n],
            phase,
            signals_since_insertion: 0,
            lambda: None,
            finetune_step: 0,
            finetune_horizon: 0,
            intervals: Vec::new(),
        })
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    pub fn counters(&self) -> &[u64] {
        &self.counters
    }

    pub fn counter(&self, row: usize, col: usize) -> u64 {
        self.counters[self.lattice.index(row, col)]
    }

    pub fn signals_since_insertion(&self) -> usize {
        self.signals_since_insertion
    }

    pub fn lambda(&self) -> Option<usize> {
        self.lambda
    }

    pub fn set_lambda(&mut self, lambda: usize) {
        self.lambda = Some(lambda.max(1));
    }

    pub fn neuron_count(&self) -> usize {
        self.lattice.len()
    }

    pub fn intervals(&self) -> &[IntervalRecord] {
        &self.intervals
    }

    pub fn freeze(&mut self) {
        self.phase = Phase::Frozen;
    }

    /// Sets the fine-tune horizon and restarts the decay clock.
    pub fn begin_finetune(&mut self, horizon: usize) {
        self.finetune_step = 0;
        self.finetune_horizon = horizon;
    }

    pub fn current_alpha(&self) -> T {
        match self.phase {
            Phase::Growth => self.config.alpha0,
            _ => self
                .config
                .finetune_alpha
                .at(self.finetune_step, self.finetune_horizon),
        }
    }

    /// One adaptation: the winner and its in-lattice four-neighbours move
    /// toward `x`; in the growth phase an insertion check follows every λ
    /// signals.
    pub fn train_step(&mut self, x: &[T]) -> Result<WinnerResult<T>, NetError> {
        if self.phase == Phase::Frozen {
            return Err(NetError::Frozen);
        }
        if self.phase == Phase::Growth && self.lambda.is_none() {
            return Err(NetError::LambdaUnset);
        }
        let w = self.lattice.find_winner(x, self.config.sigma)?;
        let alpha = self.current_alpha();
        self.counters[self.lattice.index(w.row, w.col)] += 1;
        self.lattice.pull(w.row, w.col, x, alpha);
        let neighbors: Vec<_> = self.lattice.neighbors(w.row, w.col).collect();
        for (r, c) in neighbors {
            self.lattice.pull(r, c, x, alpha);
        }
        match self.phase {
            Phase::Growth => {
                self.signals_since_insertion += 1;
                if Some(self.signals_since_insertion) >= self.lambda {
                    self.maybe_insert()?;
                }
            }
            _ => self.finetune_step += 1,
        }
        Ok(w)
    }

    /// Insertion check. At or above γ neurons the net switches to
    /// fine-tuning; otherwise a row or column goes between the neuron with
    /// the largest counter and its most distant direct neighbour.
    pub fn maybe_insert(&mut self) -> Result<bool, NetError> {
        if self.phase != Phase::Growth {
            return Err(NetError::WrongPhase {
                expected: "growth",
                actual: self.phase.name(),
            });
        }
        let max_counter = self.counters.iter().copied().max().unwrap_or(0);
        let interval = self.intervals.len();
        if self.lattice.len() >= self.config.gamma {
            self.phase = Phase::FineTune;
            self.intervals.push(IntervalRecord {
                interval,
                max_counter,
                rows: self.lattice.rows(),
                cols: self.lattice.cols(),
                inserted: false,
            });
            return Ok(false);
        }
        let c1 = self
            .counters
            .iter()
            .position(|&v| v == max_counter)
            .unwrap_or(0);
        let (r1, k1) = self.lattice.position(c1);
        let w1 = self.lattice.weight(r1, k1);
        let mut c2 = None;
        let mut best = -T::one();
        for (r, c) in self.lattice.neighbors(r1, k1) {
            let d = sq_dist(w1, self.lattice.weight(r, c));
            if d > best {
                best = d;
                c2 = Some((r, c));
            }
        }
        let (r2, k2) = c2.expect("a 2x2 or larger lattice has neighbours");
        if r1 == r2 {
            self.lattice.insert_column(k1.min(k2));
        } else {
            self.lattice.insert_row(r1.min(r2));
        }
        self.counters = vec![0; self.lattice.len()];
        self.signals_since_insertion = 0;
        self.intervals.push(IntervalRecord {
            interval,
            max_counter,
            rows: self.lattice.rows(),
            cols: self.lattice.cols(),
            inserted: true,
        });
        Ok(true)
    }

    /// Presents `inputs` in order until growth ends. λ is resolved from
    /// `epoch_size` unless already set.
    pub fn run_growth_phase<I>(
        &mut self,
        inputs: I,
        epoch_size: usize,
    ) -> Result<GrowthReport, NetError>
    where
        I: IntoIterator,
        I::Item: AsRef<[T]>,
    {
        if self.phase != Phase::Growth {
            return Err(NetError::WrongPhase {
                expected: "growth",
                actual: self.phase.name(),
            });
        }
        if self.lambda.is_none() {
            if epoch_size == 0 {
                return Err(NetError::EmptyInput);
            }
            self.set_lambda(resolve_lambda(self.config.lambda, epoch_size));
        }
        let start = self.intervals.len();
        let mut signals = 0;
        if self.lattice.len() >= self.config.gamma {
            self.maybe_insert()?;
        }
        let mut stream = inputs.into_iter();
        while self.phase == Phase::Growth {
            let Some(x) = stream.next() else {
                return Err(NetError::GrowthIncomplete {
                    signals,
                    rows: self.lattice.rows(),
                    cols: self.lattice.cols(),
                });
            };
            self.train_step(x.as_ref())?;
            signals += 1;
        }
        Ok(GrowthReport {
            intervals: self.intervals[start..].to_vec(),
            rows: self.lattice.rows(),
            cols: self.lattice.cols(),
            signals,
        })
    }

    /// Fine-tunes for `epochs` epochs of `epoch_size` signals each, asking
    /// `epoch_inputs` for the presentation order of every epoch, then freezes.
    pub fn run_finetune_phase<F, I>(
        &mut self,
        epochs: usize,
        epoch_size: usize,
        epoch_inputs: F,
    ) -> Result<FinetuneReport<T>, NetError>
    where
        F: FnMut(usize) -> I,
        I: IntoIterator,
        I::Item: AsRef<[T]>,
    {
        self.run_finetune_stopped(epochs, epochs, epoch_size, epoch_inputs)
    }

    /// Like [`run_finetune_phase`](Self::run_finetune_phase) with the
    /// learning-rate schedule laid out over `horizon_epochs`, but freezes
    /// after the first `epochs` of them.
    pub fn run_finetune_stopped<F, I>(
        &mut self,
        epochs: usize,
        horizon_epochs: usize,
        epoch_size: usize,
        mut epoch_inputs: F,
    ) -> Result<FinetuneReport<T>, NetError>
    where
        F: FnMut(usize) -> I,
        I: IntoIterator,
        I::Item: AsRef<[T]>,
    {
        if self.phase != Phase::FineTune {
            return Err(NetError::WrongPhase {
                expected: "finetune",
                actual: self.phase.name(),
            });
        }
        if epochs == 0 || horizon_epochs < epochs {
            return Err(NetError::InvalidConfig(format!(
                "fine-tuning needs 1 ≤ epochs ≤ horizon, got {epochs} of {horizon_epochs}"
            )));
        }
        self.begin_finetune(horizon_epochs * epoch_size);
        let mut qe = Vec::with_capacity(epochs);
        for e in 0..epochs {
            let mut sum = T::zero();
            let mut n = 0usize;
            for x in epoch_inputs(e) {
                sum = sum + self.train_step(x.as_ref())?.distance;
                n += 1;
            }
            if n == 0 {
                return Err(NetError::EmptyInput);
            }
            qe.push(sum / T::from_usize_lossy(n));
        }
        self.phase = Phase::Frozen;
        Ok(FinetuneReport {
            quantization_error: qe,
        })
    }

    /// Fine-tunes on the same ordered slice every epoch.
    pub fn finetune_on<V: AsRef<[T]>>(
        &mut self,
        inputs: &[V],
        epochs: usize,
    ) -> Result<FinetuneReport<T>, NetError> {
        self.run_finetune_phase(epochs, inputs.len(), |_| inputs.iter())
    }
}
