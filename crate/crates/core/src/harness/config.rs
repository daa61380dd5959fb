use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::adversary::Strategy;
use crate::data_gen::{default_separation, Allocation, Shape, TruthParams};
use crate::error::{Error, Result};
use crate::learner::{LearnConfig, OptConfig};

/// Every key accepted in a config file.
pub const KEYS: &[&str] = &[
    "k",
    "d",
    "n",
    "epsilon",
    "delta",
    "eta",
    "strategy",
    "gamma",
    "sigma",
    "alpha",
    "C",
    "tau",
    "shape",
    "trials",
    "seed",
    "output",
    "eval_draws",
    "separation",
    "components_per_class",
    "allocation",
    "max_iters",
    "patience",
    "tolerance",
    "threads",
    "timing",
    "sweep_eta",
    "sweep_n",
    "sweep_gamma",
    "sweep_strategy",
];

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub k: usize,
    pub d: usize,
    pub n: usize,
    pub epsilon: f64,
    pub delta: f64,
    pub eta: f64,
    pub strategy: Strategy,
    pub gamma: f64,
    pub sigma: f64,
    pub alpha: f64,
    pub c: f64,
    /// Pancake width; defaults to `2σ(ln(k/ε) + 1)`.
    pub tau: Option<f64>,
    pub shape: Shape,
    pub trials: usize,
    pub seed: u64,
    pub output: Option<PathBuf>,
    pub eval_draws: usize,
    /// Mean-separation multiplier; defaults to [`default_separation`].
    pub separation: Option<f64>,
    pub components_per_class: usize,
    pub allocation: Allocation,
    pub opt: OptConfig,
    /// Worker threads; 0 uses all cores.
    pub threads: usize,
    /// Record wall-clock times. Off by default so reports are reproducible.
    pub timing: bool,
    pub sweep_eta: Vec<f64>,
    pub sweep_n: Vec<usize>,
    pub sweep_gamma: Vec<f64>,
    pub sweep_strategy: Vec<Strategy>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            k: 3,
            d: 8,
            n: 6000,
            epsilon: 0.05,
            delta: 0.1,
            eta: 0.0,
            strategy: Strategy::None,
            gamma: 0.5,
            sigma: 0.05,
            alpha: 1.0 / 3.0,
            c: 2.0,
            tau: None,
            shape: Shape::Gaussian,
            trials: 1,
            seed: 0,
            output: None,
            eval_draws: 100_000,
            separation: None,
            components_per_class: 1,
            allocation: Allocation::Proportional,
            opt: OptConfig::default(),
            threads: 0,
            timing: false,
            sweep_eta: Vec::new(),
            sweep_n: Vec::new(),
            sweep_gamma: Vec::new(),
            sweep_strategy: Vec::new(),
        }
    }
}

/// Parses a float, also accepting `a/b` (e.g. `alpha = 1/3`).
fn parse_f64(s: &str) -> Option<f64> {
    if let Some((a, b)) = s.split_once('/') {
        let a: f64 = a.trim().parse().ok()?;
        let b: f64 = b.trim().parse().ok()?;
        return Some(a / b);
    }
    s.parse().ok()
}

fn parse_list<T>(s: &str, one: impl Fn(&str) -> Option<T>) -> Option<Vec<T>> {
    s.split(',').map(|t| one(t.trim())).collect()
}

fn fmt_list<T: ToString>(v: &[T]) -> String {
    v.iter().map(ToString::to_string).collect::<Vec<_>>().join(", ")
}

impl ExperimentConfig {
    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path)
            .map_err(|e| Error::invalid(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(path, &text)
    }

    /// Parses `key = value` lines; `#` starts a comment. Unknown keys and
    /// repeated keys are errors. The result is validated.
    pub fn parse(path: &Path, text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        let mut seen: Vec<&str> = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |message: String| Error::Parse {
                path: path.to_path_buf(),
                line: line_no,
                message,
            };
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| err(format!("expected 'key = value', got '{line}'")))?;
            let (key, value) = (key.trim(), value.trim());
            let Some(&known) = KEYS.iter().find(|k| **k == key) else {
                return Err(err(format!("unknown key '{key}'")));
            };
            if seen.contains(&known) {
                return Err(err(format!("key '{key}' given twice")));
            }
            seen.push(known);
            cfg.set(key, value).map_err(|m| err(m))?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Sets one key from its text value.
    pub fn set(&mut self, key: &str, value: &str) -> std::result::Result<(), String> {
        let bad = || format!("invalid value '{value}' for '{key}'");
        let float = || parse_f64(value).ok_or_else(bad);
        let int = || value.parse::<usize>().map_err(|_| bad());
        match key {
            "k" => self.k = int()?,
            "d" => self.d = int()?,
            "n" => self.n = int()?,
            "epsilon" => self.epsilon = float()?,
            "delta" => self.delta = float()?,
            "eta" => self.eta = float()?,
            "strategy" => self.strategy = Strategy::from_str(value).map_err(|e| e.to_string())?,
            "gamma" => self.gamma = float()?,
            "sigma" => self.sigma = float()?,
            "alpha" => self.alpha = float()?,
            "C" => self.c = float()?,
            "tau" => self.tau = Some(float()?),
            "shape" => self.shape = Shape::from_str(value).map_err(|e| e.to_string())?,
            "trials" => self.trials = int()?,
            "seed" => self.seed = value.parse().map_err(|_| bad())?,
            "output" => self.output = Some(PathBuf::from(value)),
            "eval_draws" => self.eval_draws = int()?,
            "separation" => self.separation = Some(float()?),
            "components_per_class" => self.components_per_class = int()?,
            "allocation" => self.allocation = Allocation::from_str(value).map_err(|e| e.to_string())?,
            "max_iters" => self.opt.max_iters = int()?,
            "patience" => self.opt.patience = int()?,
            "tolerance" => self.opt.tolerance = float()?,
            "threads" => self.threads = int()?,
            "timing" => self.timing = value.parse().map_err(|_| bad())?,
            "sweep_eta" => self.sweep_eta = parse_list(value, parse_f64).ok_or_else(bad)?,
            "sweep_n" => self.sweep_n = parse_list(value, |t| t.parse().ok()).ok_or_else(bad)?,
            "sweep_gamma" => self.sweep_gamma = parse_list(value, parse_f64).ok_or_else(bad)?,
            "sweep_strategy" => {
                self.sweep_strategy = parse_list(value, |t| Strategy::from_str(t).ok()).ok_or_else(bad)?
            }
            _ => return Err(format!("unknown key '{key}'")),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let unit = |name: &str, v: f64| {
            if v > 0.0 && v < 1.0 {
                Ok(())
            } else {
                Err(Error::invalid(format!("{name} must lie in (0, 1), got {v}")))
            }
        };
        unit("epsilon", self.epsilon)?;
        unit("delta", self.delta)?;
        unit("alpha", self.alpha)?;
        if self.n == 0 || self.trials == 0 || self.eval_draws == 0 {
            return Err(Error::invalid("n, trials and eval_draws must be at least 1"));
        }
        if !(0.0..1.0).contains(&self.eta) || self.sweep_eta.iter().any(|e| !(0.0..1.0).contains(e)) {
            return Err(Error::invalid("eta must lie in [0, 1)"));
        }
        if self.sweep_n.contains(&0) {
            return Err(Error::invalid("sweep_n entries must be at least 1"));
        }
        for g in std::iter::once(&self.gamma).chain(&self.sweep_gamma) {
            if !(*g > 0.0 && g.is_finite()) {
                return Err(Error::invalid(format!("gamma must be positive, got {g}")));
            }
        }
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(Error::invalid(format!("sigma must be positive, got {}", self.sigma)));
        }
        if !(self.c >= 1.0 && self.c.is_finite()) {
            return Err(Error::invalid(format!("C must be >= 1, got {}", self.c)));
        }
        if let Some(t) = self.tau {
            if !(t > 0.0) {
                return Err(Error::invalid(format!("tau must be positive, got {t}")));
            }
        }
        self.opt.validate()
    }

    pub fn tau(&self) -> f64 {
        self.tau
            .unwrap_or(2.0 * self.sigma * ((self.k as f64 / self.epsilon).ln() + 1.0))
    }

    pub fn truth_params(&self, seed: u64) -> TruthParams {
        let mut p = TruthParams::new(self.k, self.d, self.gamma, self.sigma, self.c, self.alpha, seed);
        p.shape = self.shape;
        p.separation = self.separation.unwrap_or_else(|| default_separation(self.c));
        p.components_per_class = self.components_per_class;
        p
    }

    pub fn learn_config(&self) -> LearnConfig {
        let mut cfg = LearnConfig::new(self.gamma, self.alpha, self.c);
        cfg.opt = self.opt.clone();
        cfg
    }

    /// Regime preconditions this configuration violates (empty when in
    /// regime): `γ > max(4τ, 4Cσ)`, `η ≤ 1/(2¹² k²)`, `α ∈ [0.6/k, 1/k]`.
    pub fn regime_violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        let k = self.k as f64;
        let need = (4.0 * self.tau()).max(4.0 * self.c * self.sigma);
        if self.gamma <= need {
            out.push(format!("gamma = {} <= max(4 tau, 4 C sigma) = {need}", self.gamma));
        }
        let eta_max = 1.0 / (4096.0 * k * k);
        if self.eta > eta_max {
            out.push(format!("eta = {} > 1/(2^12 k^2) = {eta_max:.3e}", self.eta));
        }
        let lo = 0.6 / k;
        let hi = 1.0 / k;
        if self.alpha < lo - 1e-12 || self.alpha > hi + 1e-12 {
            out.push(format!("alpha = {} outside [{lo:.4}, {hi:.4}]", self.alpha));
        }
        out
    }

    /// Configuration as config-file text; parses back to an equal value.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        kv("k", self.k.to_string());
        kv("d", self.d.to_string());
        kv("n", self.n.to_string());
        kv("epsilon", self.epsilon.to_string());
        kv("delta", self.delta.to_string());
        kv("eta", self.eta.to_string());
        kv("strategy", self.strategy.to_string());
        kv("gamma", self.gamma.to_string());
        kv("sigma", self.sigma.to_string());
        kv("alpha", self.alpha.to_string());
        kv("C", self.c.to_string());
        if let Some(t) = self.tau {
            kv("tau", t.to_string());
        }
        kv("shape", self.shape.to_string());
        kv("trials", self.trials.to_string());
        kv("seed", self.seed.to_string());
        if let Some(o) = &self.output {
            kv("output", o.display().to_string());
        }
        kv("eval_draws", self.eval_draws.to_string());
        if let Some(sep) = self.separation {
            kv("separation", sep.to_string());
        }
        kv("components_per_class", self.components_per_class.to_string());
        kv("allocation", self.allocation.to_string());
        kv("max_iters", self.opt.max_iters.to_string());
        kv("patience", self.opt.patience.to_string());
        kv("tolerance", self.opt.tolerance.to_string());
        kv("threads", self.threads.to_string());
        kv("timing", self.timing.to_string());
        if !self.sweep_eta.is_empty() {
            kv("sweep_eta", fmt_list(&self.sweep_eta));
        }
        if !self.sweep_n.is_empty() {
            kv("sweep_n", fmt_list(&self.sweep_n));
        }
        if !self.sweep_gamma.is_empty() {
            kv("sweep_gamma", fmt_list(&self.sweep_gamma));
        }
        if !self.sweep_strategy.is_empty() {
            kv("sweep_strategy", fmt_list(&self.sweep_strategy));
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<ExperimentConfig> {
        ExperimentConfig::parse(Path::new("test.cfg"), text)
    }

    #[test]
    fn defaults_when_empty() {
        let cfg = parse("# nothing\n\n").unwrap();
        assert_eq!(cfg, ExperimentConfig::default());
    }

    #[test]
    fn keys_and_comments() {
        let cfg = parse(
            "k = 4\nd=10 # trailing\nalpha = 1/4\nstrategy = fake-cluster\nshape = student-t(5)\n\
             sweep_eta = 0, 0.01, 0.02\nC = 3\ntiming = true\n",
        )
        .unwrap();
        assert_eq!((cfg.k, cfg.d), (4, 10));
        assert_eq!(cfg.alpha, 0.25);
        assert_eq!(cfg.strategy, Strategy::FakeCluster);
        assert_eq!(cfg.shape, Shape::StudentT { nu: 5.0 });
        assert_eq!(cfg.sweep_eta, vec![0.0, 0.01, 0.02]);
        assert_eq!(cfg.c, 3.0);
        assert!(cfg.timing);
    }

    #[test]
    fn unknown_and_malformed_lines_report_their_line() {
        match parse("k = 3\ngama = 0.5\n") {
            Err(Error::Parse { line, message, .. }) => {
                assert_eq!(line, 2);
                assert!(message.contains("gama"));
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(parse("k 3"), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(parse("k = three"), Err(Error::Parse { .. })));
        assert!(matches!(parse("k = 3\nk = 4"), Err(Error::Parse { line: 2, .. })));
    }

    #[test]
    fn validation() {
        assert!(matches!(parse("epsilon = 1"), Err(Error::InvalidArgument(_))));
        assert!(matches!(parse("trials = 0"), Err(Error::InvalidArgument(_))));
        assert!(matches!(parse("eta = 1.5"), Err(Error::InvalidArgument(_))));
        assert!(matches!(parse("gamma = -1"), Err(Error::InvalidArgument(_))));
        assert!(matches!(parse("C = 0.5"), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn text_round_trip() {
        let mut cfg = ExperimentConfig::default();
        cfg.sweep_n = vec![100, 200];
        cfg.sweep_strategy = vec![Strategy::RandomReplace, Strategy::FakeCluster];
        cfg.output = Some(PathBuf::from("out.csv"));
        cfg.tau = Some(0.3);
        assert_eq!(parse(&cfg.to_text()).unwrap(), cfg);
    }

    #[test]
    fn regime_checks() {
        let cfg = ExperimentConfig::default();
        let v = cfg.regime_violations();
        // Default tau = 2σ(ln 60 + 1) ≈ 0.51 so γ = 0.5 misses 4τ.
        assert!(v.iter().any(|m| m.starts_with("gamma")));
        assert!(!v.iter().any(|m| m.starts_with("eta")));
        assert!(!v.iter().any(|m| m.starts_with("alpha")));
        let mut noisy = cfg.clone();
        noisy.eta = 0.01;
        noisy.alpha = 0.1;
        let v = noisy.regime_violations();
        assert!(v.iter().any(|m| m.starts_with("eta")));
        assert!(v.iter().any(|m| m.starts_with("alpha")));
    }
}
