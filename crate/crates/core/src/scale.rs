//! Scale functions on the positive reals: construction, evaluation,
//! subpower/sublinear classification, and the two `psi` constructions
//! that transport test functions across the log-remetrization.
//!
//! A function is *asymptotically subpower* when it is eventually below
//! `x^a` for every exponent `a > 0`, and *asymptotically sublinear* when
//! it is eventually below `c*x` for every `c > 0`. Classification is
//! symbolic (exact) on monomial sums and window-relative (a finite grid
//! of exponents or constants scanned up to a horizon) for everything
//! else.

use std::fmt;

use thiserror::Error;

/// Horizon used by window-relative checks when the caller has no better
/// choice.
pub const DEFAULT_HORIZON: f64 = 1e6;

/// Default exponent grid approximating "for every a > 0".
pub const DEFAULT_SUBPOWER_GRID: [f64; 4] = [1.0, 0.5, 0.25, 0.125];

/// Default constant grid approximating "for every c > 0".
pub const DEFAULT_SUBLINEAR_GRID: [f64; 5] = [2.0, 1.0, 0.5, 0.25, 0.125];

/// Geometric ratio for threshold searches in `psi_backward`.
const PSI_GRID_RATIO: f64 = 1.05;

/// Geometric ratio for `numeric_check` sampling.
const SAMPLE_RATIO: f64 = 1.02;

#[derive(Error, Debug, Clone, PartialEq)]
pub enum ScaleError {
    #[error("evaluation outside domain: x = {x}")]
    EvalDomain { x: f64 },
    #[error("x = {x} outside tabulated range [{lo}, {hi}]")]
    TabulatedRange { x: f64, lo: f64, hi: f64 },
    #[error("horizon {horizon} extends beyond tabulated range ending at {hi}")]
    HorizonBeyondTable { horizon: f64, hi: f64 },
    #[error("empty test grid")]
    EmptyGrid,
    #[error("invalid function: {0}")]
    InvalidFunction(String),
    #[error("no threshold for slope 1/{n} within horizon {horizon} (function is not subpower on this window, or the horizon is too small)")]
    ThresholdNotFound { n: usize, horizon: f64 },
    #[error("parse error at byte {pos}: {msg}")]
    Parse { pos: usize, msg: String },
}

/// Symbolic scale function on `(0, oo)`.
#[derive(Clone, Debug, PartialEq)]
pub enum ScaleFunction {
    /// `c * x^power * ln(e + x)^log_power`. Negative `log_power` is
    /// permitted so that quotients like `x / ln(e + x)` stay symbolic.
    Monomial { coeff: f64, power: f64, log_power: i32 },
    Sum(Vec<ScaleFunction>),
    /// `x -> e^{inner(ln(1 + x))} - 1`.
    ExpLogWrap(Box<ScaleFunction>),
    /// `1` on `(0, c_1]`, `x/n` on `(c_n, c_{n+1}]`, `x/m` beyond `c_m`.
    PiecewiseSlope { thresholds: Vec<f64> },
    /// Linear interpolation between strictly increasing sample abscissae.
    Tabulated { samples: Vec<(f64, f64)> },
}

impl ScaleFunction {
    /// `c * x^power * ln(e + x)^log_power`; panics on a negative or
    /// non-finite coefficient (programmer error).
    pub fn monomial(coeff: f64, power: f64, log_power: i32) -> ScaleFunction {
        assert!(coeff.is_finite() && coeff >= 0.0, "monomial coefficient must be finite and >= 0");
        assert!(power.is_finite(), "monomial power must be finite");
        ScaleFunction::Monomial { coeff, power, log_power }
    }

    pub fn constant(v: f64) -> ScaleFunction {
        Self::monomial(v, 0.0, 0)
    }

    pub fn identity() -> ScaleFunction {
        Self::monomial(1.0, 1.0, 0)
    }

    pub fn sum(terms: Vec<ScaleFunction>) -> Result<ScaleFunction, ScaleError> {
        if terms.is_empty() {
            return Err(ScaleError::InvalidFunction("sum needs at least one term".into()));
        }
        Ok(ScaleFunction::Sum(terms))
    }

    pub fn exp_log_wrap(inner: ScaleFunction) -> ScaleFunction {
        ScaleFunction::ExpLogWrap(Box::new(inner))
    }

    pub fn piecewise(thresholds: Vec<f64>) -> Result<ScaleFunction, ScaleError> {
        if thresholds.is_empty() {
            return Err(ScaleError::InvalidFunction("piecewise needs at least one threshold".into()));
        }
        for w in thresholds.windows(2) {
            if !(w[0] < w[1]) {
                return Err(ScaleError::InvalidFunction(format!(
                    "piecewise thresholds must strictly increase ({} then {})",
                    w[0], w[1]
                )));
            }
        }
        if !(thresholds[0] > 0.0 && thresholds.iter().all(|t| t.is_finite())) {
            return Err(ScaleError::InvalidFunction("piecewise thresholds must be finite and positive".into()));
        }
        Ok(ScaleFunction::PiecewiseSlope { thresholds })
    }

    pub fn tabulated(samples: Vec<(f64, f64)>) -> Result<ScaleFunction, ScaleError> {
        if samples.is_empty() {
            return Err(ScaleError::InvalidFunction("tabulated needs at least one sample".into()));
        }
        for w in samples.windows(2) {
            if !(w[0].0 < w[1].0) {
                return Err(ScaleError::InvalidFunction(format!(
                    "tabulated abscissae must strictly increase ({} then {})",
                    w[0].0, w[1].0
                )));
            }
        }
        for &(x, y) in &samples {
            if !(x.is_finite() && x > 0.0 && y.is_finite() && y >= 0.0) {
                return Err(ScaleError::InvalidFunction(format!(
                    "tabulated sample ({x}, {y}) outside domain"
                )));
            }
        }
        Ok(ScaleFunction::Tabulated { samples })
    }

    /// Evaluates at `x >= 0`.
    pub fn eval(&self, x: f64) -> Result<f64, ScaleError> {
        if !(x >= 0.0) {
            return Err(ScaleError::EvalDomain { x });
        }
        match self {
            ScaleFunction::Monomial { coeff, power, log_power } => {
                if *coeff == 0.0 {
                    return Ok(0.0);
                }
                let log = (std::f64::consts::E + x).ln();
                Ok(coeff * x.powf(*power) * log.powi(*log_power))
            }
            ScaleFunction::Sum(terms) => {
                let mut acc = 0.0;
                for t in terms {
                    acc += t.eval(x)?;
                }
                Ok(acc)
            }
            ScaleFunction::ExpLogWrap(inner) => Ok(inner.eval(x.ln_1p())?.exp_m1()),
            ScaleFunction::PiecewiseSlope { thresholds } => {
                let n = thresholds.iter().take_while(|&&c| c < x).count();
                if n == 0 {
                    Ok(1.0)
                } else {
                    Ok(x / n as f64)
                }
            }
            ScaleFunction::Tabulated { samples } => {
                let lo = samples[0].0;
                let hi = samples[samples.len() - 1].0;
                if x < lo || x > hi {
                    return Err(ScaleError::TabulatedRange { x, lo, hi });
                }
                let idx = samples.partition_point(|&(sx, _)| sx < x);
                if idx == 0 {
                    return Ok(samples[0].1);
                }
                let (x0, y0) = samples[idx - 1];
                let (x1, y1) = samples[idx.min(samples.len() - 1)];
                if x1 == x0 {
                    return Ok(y0);
                }
                Ok(y0 + (y1 - y0) * (x - x0) / (x1 - x0))
            }
        }
    }

    /// Largest tabulated abscissa reachable through the tree, if any
    /// tabulated node is present.
    fn tabulated_end(&self) -> Option<f64> {
        match self {
            ScaleFunction::Monomial { .. } | ScaleFunction::PiecewiseSlope { .. } => None,
            ScaleFunction::Sum(terms) => terms
                .iter()
                .filter_map(|t| t.tabulated_end())
                .fold(None, |acc, v| Some(acc.map_or(v, |a: f64| a.min(v)))),
            ScaleFunction::ExpLogWrap(inner) => {
                // the inner function is evaluated at ln(1+x)
                inner.tabulated_end().map(|e| e.exp_m1())
            }
            ScaleFunction::Tabulated { samples } => Some(samples[samples.len() - 1].0),
        }
    }

    fn tabulated_start(&self) -> Option<f64> {
        match self {
            ScaleFunction::Monomial { .. } | ScaleFunction::PiecewiseSlope { .. } => None,
            ScaleFunction::Sum(terms) => terms
                .iter()
                .filter_map(|t| t.tabulated_start())
                .fold(None, |acc, v| Some(acc.map_or(v, |a: f64| a.max(v)))),
            ScaleFunction::ExpLogWrap(inner) => inner.tabulated_start().map(|s| s.exp_m1()),
            ScaleFunction::Tabulated { samples } => Some(samples[0].0),
        }
    }

    /// Flattens into monomial terms when the tree is built from
    /// monomials and sums only.
    fn collect_monomials(&self, out: &mut Vec<(f64, f64, i32)>) -> bool {
        match self {
            ScaleFunction::Monomial { coeff, power, log_power } => {
                out.push((*coeff, *power, *log_power));
                true
            }
            ScaleFunction::Sum(terms) => terms.iter().all(|t| t.collect_monomials(out)),
            _ => false,
        }
    }
}

impl fmt::Display for ScaleFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use crate::textio::roundtrip;
        match self {
            ScaleFunction::Monomial { coeff, power, log_power } => {
                write!(f, "mono({},{},{})", roundtrip(*coeff), roundtrip(*power), log_power)
            }
            ScaleFunction::Sum(terms) => {
                write!(f, "sum(")?;
                for (i, t) in terms.iter().enumerate() {
                    if i > 0 {
                        write!(f, ",")?;
                    }
                    write!(f, "{t}")?;
                }
                write!(f, ")")
            }
            ScaleFunction::ExpLogWrap(inner) => write!(f, "explogwrap({inner})"),
            ScaleFunction::PiecewiseSlope { thresholds } => {
                write!(f, "piecewise(")?;
                for (i, t) in thresholds.iter().enumerate() {
                    if i > 0 {
                        write!(f, ",")?;
                    }
                    write!(f, "{}", roundtrip(*t))?;
                }
                write!(f, ")")
            }
            ScaleFunction::Tabulated { samples } => {
                write!(f, "tab(")?;
                for (i, (x, y)) in samples.iter().enumerate() {
                    if i > 0 {
                        write!(f, ",")?;
                    }
                    write!(f, "{},{}", roundtrip(*x), roundtrip(*y))?;
                }
                write!(f, ")")
            }
        }
    }
}

/// Three-valued result of a growth classification.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Verdict {
    Yes,
    No,
    Unknown,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Verdict::Yes => write!(f, "yes"),
            Verdict::No => write!(f, "no"),
            Verdict::Unknown => write!(f, "unknown"),
        }
    }
}

/// Result of `classify` / `numeric_check` with a human-readable witness.
#[derive(Clone, Debug)]
pub struct Classification {
    pub subpower: Verdict,
    pub sublinear: Verdict,
    pub certificate: String,
}

/// Which growth condition a check targets.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum GrowthMode {
    Subpower,
    Sublinear,
}

impl GrowthMode {
    pub fn name(self) -> &'static str {
        match self {
            GrowthMode::Subpower => "subpower",
            GrowthMode::Sublinear => "sublinear",
        }
    }

    pub fn default_grid(self) -> &'static [f64] {
        match self {
            GrowthMode::Subpower => &DEFAULT_SUBPOWER_GRID,
            GrowthMode::Sublinear => &DEFAULT_SUBLINEAR_GRID,
        }
    }

    fn bound(self, grid_value: f64, x: f64) -> f64 {
        match self {
            GrowthMode::Subpower => x.powf(grid_value),
            GrowthMode::Sublinear => grid_value * x,
        }
    }

    fn grid_symbol(self) -> &'static str {
        match self {
            GrowthMode::Subpower => "alpha",
            GrowthMode::Sublinear => "c",
        }
    }
}

/// Symbolic classification. Exact for monomial sums; `PiecewiseSlope`
/// reports its truncation honestly; wrapped and tabulated functions defer
/// to `numeric_check`.
pub fn classify(f: &ScaleFunction) -> Classification {
    let mut monos = Vec::new();
    if f.collect_monomials(&mut monos) {
        return classify_monomials(&monos);
    }
    match f {
        ScaleFunction::PiecewiseSlope { thresholds } => Classification {
            subpower: Verdict::No,
            sublinear: Verdict::Unknown,
            certificate: format!(
                "truncated construction: x/{} beyond the last threshold fails every alpha < 1; sublinearity depends on the untruncated tail",
                thresholds.len()
            ),
        },
        _ => Classification {
            subpower: Verdict::Unknown,
            sublinear: Verdict::Unknown,
            certificate: "no symbolic rule for this node; use numeric_check".into(),
        },
    }
}

fn classify_monomials(monos: &[(f64, f64, i32)]) -> Classification {
    let active: Vec<&(f64, f64, i32)> = monos.iter().filter(|m| m.0 > 0.0).collect();
    if active.is_empty() {
        return Classification {
            subpower: Verdict::Yes,
            sublinear: Verdict::Yes,
            certificate: "zero function".into(),
        };
    }
    // subpower iff every term has power <= 0; sublinear iff every term has
    // power < 1, or power == 1 with a negative log power
    let mut subpower = Verdict::Yes;
    let mut sublinear = Verdict::Yes;
    let mut cert = String::new();
    for &&(c, beta, k) in &active {
        if beta > 0.0 && subpower == Verdict::Yes {
            subpower = Verdict::No;
            let alpha = beta / 2.0;
            cert.push_str(&format!(
                "not subpower: {c}*x^{beta}*ln^{k} >= x^{alpha} for all large x (fails alpha={alpha}); "
            ));
        }
        let term_sublinear = beta < 1.0 || (beta == 1.0 && k < 0);
        if !term_sublinear && sublinear == Verdict::Yes {
            sublinear = Verdict::No;
            if beta == 1.0 && k == 0 {
                cert.push_str(&format!("not sublinear: fails c = {} ({c}*x >= {}*x); ", c / 2.0, c / 2.0));
            } else {
                cert.push_str(&format!("not sublinear: {c}*x^{beta}*ln^{k} dominates every c*x; "));
            }
        }
    }
    if subpower == Verdict::Yes {
        cert.push_str("subpower: every term has power <= 0, so p(x) < x^alpha eventually for each alpha > 0; ");
    }
    if sublinear == Verdict::Yes && subpower != Verdict::Yes {
        cert.push_str("sublinear: every term has power < 1 (or a decaying log factor at power 1); ");
    }
    Classification { subpower, sublinear, certificate: cert.trim_end().trim_end_matches(';').to_string() }
}

/// Window-relative empirical test of the defining inequality on
/// `(threshold, horizon]` for each grid value.
///
/// Returns `Yes` when every grid value admits a threshold at or below
/// `horizon / 2`; `No` when some grid value is violated at the horizon
/// itself with a non-improving ratio `f(x) / bound(x)`; otherwise
/// `Unknown`. The verdict is about the window only.
pub fn numeric_check(
    f: &ScaleFunction,
    mode: GrowthMode,
    horizon: f64,
    grid: &[f64],
) -> Result<Classification, ScaleError> {
    if grid.is_empty() {
        return Err(ScaleError::EmptyGrid);
    }
    if !(horizon.is_finite() && horizon > 1.0) {
        return Err(ScaleError::InvalidFunction(format!("horizon {horizon} out of range")));
    }
    if let Some(end) = f.tabulated_end() {
        if end < horizon {
            return Err(ScaleError::HorizonBeyondTable { horizon, hi: end });
        }
    }
    let start = f.tabulated_start().unwrap_or(1.0).max(1.0);
    let samples = geometric_samples(start, horizon, SAMPLE_RATIO);
    let mid_idx = nearest_sample(&samples, (start * horizon).sqrt());

    let mut undecided: Option<f64> = None;
    let mut worst_threshold = start;
    for &g in grid {
        let mut last_violation: Option<usize> = None;
        for (i, &x) in samples.iter().enumerate() {
            let fx = f.eval(x)?;
            let bx = mode.bound(g, x);
            if !(fx < bx) {
                last_violation = Some(i);
            }
        }
        match last_violation {
            None => {}
            Some(vi) => {
                let v = samples[vi];
                if v <= horizon / 2.0 {
                    worst_threshold = worst_threshold.max(v);
                } else if vi + 2 >= samples.len() {
                    // violated at (or immediately before) the horizon:
                    // decide by the trend of f/bound
                    let q_hi = f.eval(samples[samples.len() - 1])?
                        / mode.bound(g, samples[samples.len() - 1]);
                    let q_mid = f.eval(samples[mid_idx])? / mode.bound(g, samples[mid_idx]);
                    if q_hi >= 0.999 * q_mid {
                        return Ok(mode_result(
                            mode,
                            Verdict::No,
                            format!(
                                "{}={g} violated at x={v} near horizon {horizon} with non-improving ratio {:.3}",
                                mode.grid_symbol(),
                                q_hi
                            ),
                        ));
                    }
                    undecided = Some(g);
                } else {
                    undecided = Some(g);
                }
            }
        }
    }
    if let Some(g) = undecided {
        return Ok(mode_result(
            mode,
            Verdict::Unknown,
            format!(
                "{}={g}: no threshold at or below horizon/2 = {}, but the ratio improves toward the horizon; window too small to decide",
                mode.grid_symbol(),
                horizon / 2.0
            ),
        ));
    }
    Ok(mode_result(
        mode,
        Verdict::Yes,
        format!(
            "every {} in {:?} admits a threshold <= {worst_threshold} on (threshold, {horizon}]",
            mode.grid_symbol(),
            grid
        ),
    ))
}

fn mode_result(mode: GrowthMode, verdict: Verdict, certificate: String) -> Classification {
    match mode {
        GrowthMode::Subpower => Classification {
            subpower: verdict,
            // every subpower function is sublinear
            sublinear: if verdict == Verdict::Yes { Verdict::Yes } else { Verdict::Unknown },
            certificate,
        },
        GrowthMode::Sublinear => Classification {
            subpower: if verdict == Verdict::No { Verdict::No } else { Verdict::Unknown },
            sublinear: verdict,
            certificate,
        },
    }
}

fn geometric_samples(start: f64, end: f64, ratio: f64) -> Vec<f64> {
    let mut out = Vec::new();
    let mut x = start;
    while x < end {
        out.push(x);
        x *= ratio;
    }
    out.push(end);
    out
}

fn nearest_sample(samples: &[f64], target: f64) -> usize {
    let idx = samples.partition_point(|&s| s < target);
    idx.min(samples.len() - 1)
}

/// Wraps a sublinear function `phi` into `x -> e^{phi(ln(1+x))} - 1`,
/// which is subpower whenever `phi` is sublinear. The wrap is returned
/// unevaluated; the growth contract is checked by tests, not assumed.
pub fn psi_forward(phi: &ScaleFunction) -> ScaleFunction {
    ScaleFunction::exp_log_wrap(phi.clone())
}

/// Builds the piecewise-slope function whose threshold `c_n` is the
/// smallest grid point beyond which `1 + phi(x) < x^(1/n)` holds on a
/// geometric sample up to `horizon` (`n = 1` uses the plain inequality
/// `1 + phi(x) < x`). Fails, naming `n`, when a slope admits no
/// threshold within the horizon.
pub fn psi_backward(
    phi: &ScaleFunction,
    depth: usize,
    horizon: f64,
) -> Result<ScaleFunction, ScaleError> {
    if depth == 0 {
        return Err(ScaleError::InvalidFunction("psi_backward depth must be >= 1".into()));
    }
    if !(horizon.is_finite() && horizon > 1.0) {
        return Err(ScaleError::InvalidFunction(format!("horizon {horizon} out of range")));
    }
    if let Some(end) = phi.tabulated_end() {
        if end < horizon {
            return Err(ScaleError::HorizonBeyondTable { horizon, hi: end });
        }
    }
    let start = phi.tabulated_start().unwrap_or(1.0).max(1.0);
    let samples = geometric_samples(start, horizon, PSI_GRID_RATIO);
    let mut thresholds = Vec::with_capacity(depth);
    for n in 1..=depth {
        let exponent = 1.0 / n as f64;
        let mut last_violation: Option<usize> = None;
        for (i, &x) in samples.iter().enumerate() {
            let lhs = 1.0 + phi.eval(x)?;
            if !(lhs < x.powf(exponent)) {
                last_violation = Some(i);
            }
        }
        let mut c_n = match last_violation {
            None => samples[0],
            Some(vi) if vi + 1 >= samples.len() => {
                return Err(ScaleError::ThresholdNotFound { n, horizon });
            }
            Some(vi) => samples[vi + 1],
        };
        if let Some(&prev) = thresholds.last() {
            if c_n <= prev {
                c_n = prev * (1.0 + 1e-9);
            }
        }
        thresholds.push(c_n);
    }
    ScaleFunction::piecewise(thresholds)
}

/// Parses the prefix text form, e.g. `sum(mono(1,0,1),explogwrap(mono(0.5,1,0)))`.
pub fn parse(text: &str) -> Result<ScaleFunction, ScaleError> {
    let mut p = Parser { bytes: text.as_bytes(), pos: 0 };
    let f = p.expr()?;
    p.skip_ws();
    if p.pos != p.bytes.len() {
        return Err(ScaleError::Parse { pos: p.pos, msg: "trailing input".into() });
    }
    Ok(f)
}

struct Parser<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Parser<'_> {
    fn skip_ws(&mut self) {
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn expect(&mut self, ch: u8) -> Result<(), ScaleError> {
        self.skip_ws();
        if self.pos < self.bytes.len() && self.bytes[self.pos] == ch {
            self.pos += 1;
            Ok(())
        } else {
            Err(ScaleError::Parse { pos: self.pos, msg: format!("expected '{}'", ch as char) })
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.bytes.get(self.pos).copied()
    }

    fn ident(&mut self) -> Result<&str, ScaleError> {
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_alphabetic() {
            self.pos += 1;
        }
        if self.pos == start {
            return Err(ScaleError::Parse { pos: start, msg: "expected function name".into() });
        }
        Ok(std::str::from_utf8(&self.bytes[start..self.pos]).unwrap())
    }

    fn number(&mut self) -> Result<f64, ScaleError> {
        self.skip_ws();
        let start = self.pos;
        let mut prev = 0u8;
        while self.pos < self.bytes.len() {
            let b = self.bytes[self.pos];
            let ok = b.is_ascii_digit()
                || b == b'.'
                || b == b'e'
                || b == b'E'
                || ((b == b'+' || b == b'-') && (self.pos == start || prev == b'e' || prev == b'E'));
            if !ok {
                break;
            }
            prev = b;
            self.pos += 1;
        }
        let s = std::str::from_utf8(&self.bytes[start..self.pos]).unwrap();
        s.parse::<f64>()
            .map_err(|_| ScaleError::Parse { pos: start, msg: format!("bad number '{s}'") })
    }

    fn expr(&mut self) -> Result<ScaleFunction, ScaleError> {
        let name_pos = self.pos;
        let name = self.ident()?.to_string();
        self.expect(b'(')?;
        let f = match name.as_str() {
            "mono" => {
                let c = self.number()?;
                self.expect(b',')?;
                let beta = self.number()?;
                self.expect(b',')?;
                let k = self.number()?;
                if !(c.is_finite() && c >= 0.0) {
                    return Err(ScaleError::Parse {
                        pos: name_pos,
                        msg: format!("monomial coefficient {c} must be finite and >= 0"),
                    });
                }
                if k.fract() != 0.0 || k.abs() > i32::MAX as f64 {
                    return Err(ScaleError::Parse {
                        pos: name_pos,
                        msg: format!("log power {k} must be an integer"),
                    });
                }
                ScaleFunction::monomial(c, beta, k as i32)
            }
            "sum" => {
                let mut terms = vec![self.expr()?];
                while self.peek() == Some(b',') {
                    self.pos += 1;
                    terms.push(self.expr()?);
                }
                ScaleFunction::Sum(terms)
            }
            "explogwrap" => ScaleFunction::exp_log_wrap(self.expr()?),
            "piecewise" => {
                let mut ts = vec![self.number()?];
                while self.peek() == Some(b',') {
                    self.pos += 1;
                    ts.push(self.number()?);
                }
                ScaleFunction::piecewise(ts)
                    .map_err(|e| ScaleError::Parse { pos: name_pos, msg: e.to_string() })?
            }
            "tab" => {
                let mut vals = vec![self.number()?];
                while self.peek() == Some(b',') {
                    self.pos += 1;
                    vals.push(self.number()?);
                }
                if vals.len() % 2 != 0 {
                    return Err(ScaleError::Parse {
                        pos: name_pos,
                        msg: "tab needs an even number of values (x,y pairs)".into(),
                    });
                }
                let samples: Vec<(f64, f64)> =
                    vals.chunks(2).map(|c| (c[0], c[1])).collect();
                ScaleFunction::tabulated(samples)
                    .map_err(|e| ScaleError::Parse { pos: name_pos, msg: e.to_string() })?
            }
            other => {
                return Err(ScaleError::Parse {
                    pos: name_pos,
                    msg: format!("unknown function '{other}'"),
                })
            }
        };
        self.expect(b')')?;
        Ok(f)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mono(c: f64, b: f64, k: i32) -> ScaleFunction {
        ScaleFunction::monomial(c, b, k)
    }

    #[test]
    fn eval_examples() {
        let e = std::f64::consts::E;
        // ln(e + x) at x = e^2 - e is 2
        let f = mono(1.0, 0.0, 1);
        assert!((f.eval(e * e - e).unwrap() - 2.0).abs() < 1e-12);

        // explogwrap of the identity is the identity
        let id = psi_forward(&ScaleFunction::identity());
        for x in [0.1, 1.0, 7.0, 123.456] {
            assert!((id.eval(x).unwrap() - x).abs() < 1e-9 * x.max(1.0));
        }

        // piecewise slopes
        let pw = ScaleFunction::piecewise(vec![10.0, 100.0]).unwrap();
        assert_eq!(pw.eval(50.0).unwrap(), 25.0);
        assert_eq!(pw.eval(5.0).unwrap(), 1.0);
        assert_eq!(pw.eval(10.0).unwrap(), 1.0); // (0, c1] keeps the floor value
        assert_eq!(pw.eval(1000.0).unwrap(), 500.0);
    }

    #[test]
    fn eval_tabulated_range_error() {
        let t = ScaleFunction::tabulated(vec![(1.0, 1.0), (10.0, 3.0)]).unwrap();
        assert!((t.eval(5.5).unwrap() - 2.0).abs() < 1e-12);
        assert!(matches!(t.eval(20.0), Err(ScaleError::TabulatedRange { .. })));
    }

    #[test]
    fn classify_examples() {
        let c = classify(&mono(1.0, 0.0, 1)); // ln(e+x)
        assert_eq!(c.subpower, Verdict::Yes);
        assert_eq!(c.sublinear, Verdict::Yes);

        let c = classify(&mono(1.0, 0.5, 0)); // sqrt(x)
        assert_eq!(c.subpower, Verdict::No);
        assert_eq!(c.sublinear, Verdict::Yes);

        let c = classify(&mono(2.0, 1.0, 0)); // 2x
        assert_eq!(c.subpower, Verdict::No);
        assert_eq!(c.sublinear, Verdict::No);
        assert!(c.certificate.contains("c = 1"));

        // x / ln(e+x): negative log power at the linear boundary
        let c = classify(&mono(1.0, 1.0, -1));
        assert_eq!(c.subpower, Verdict::No);
        assert_eq!(c.sublinear, Verdict::Yes);

        let c = classify(&ScaleFunction::piecewise(vec![3.0, 9.0]).unwrap());
        assert_eq!(c.subpower, Verdict::No);
        assert_eq!(c.sublinear, Verdict::Unknown);
        assert!(c.certificate.contains("truncated construction"));

        let c = classify(&psi_forward(&mono(1.0, 0.0, 1)));
        assert_eq!(c.subpower, Verdict::Unknown);
    }

    #[test]
    fn classify_sum_uses_every_positive_term() {
        let f = ScaleFunction::sum(vec![mono(1.0, 0.0, 2), mono(0.0, 3.0, 0)]).unwrap();
        let c = classify(&f);
        assert_eq!(c.subpower, Verdict::Yes); // zero-coefficient term ignored

        let f = ScaleFunction::sum(vec![mono(1.0, 0.0, 2), mono(0.5, 2.0, 0)]).unwrap();
        let c = classify(&f);
        assert_eq!(c.subpower, Verdict::No);
        assert_eq!(c.sublinear, Verdict::No);
    }

    #[test]
    fn numeric_check_examples() {
        // ln^2(e+x) passes alpha in {1, 1/2} on the default horizon
        let c = numeric_check(&mono(1.0, 0.0, 2), GrowthMode::Subpower, 1e6, &[1.0, 0.5]).unwrap();
        assert_eq!(c.subpower, Verdict::Yes);

        // with alpha = 1/4 the horizon 1e6 is too small to decide: the
        // inequality is still violated at the horizon but the ratio is
        // falling, so the verdict is window-relative unknown
        let c = numeric_check(&mono(1.0, 0.0, 2), GrowthMode::Subpower, 1e6, &[1.0, 0.5, 0.25])
            .unwrap();
        assert_eq!(c.subpower, Verdict::Unknown);
        // ... and a larger horizon decides it
        let c = numeric_check(&mono(1.0, 0.0, 2), GrowthMode::Subpower, 1e14, &[1.0, 0.5, 0.25])
            .unwrap();
        assert_eq!(c.subpower, Verdict::Yes);

        // x is not sublinear: c = 1/2 is violated everywhere
        let c = numeric_check(
            &ScaleFunction::identity(),
            GrowthMode::Sublinear,
            1e6,
            &[2.0, 1.0, 0.5],
        )
        .unwrap();
        assert_eq!(c.sublinear, Verdict::No);
        assert_eq!(c.subpower, Verdict::No);

        // a table of sqrt(x) against alpha = 1/4: violations persist
        let samples: Vec<(f64, f64)> = (0..=60)
            .map(|i| {
                let x = 1.25f64.powi(i);
                (x, x.sqrt())
            })
            .collect();
        let horizon = samples[samples.len() - 1].0;
        let t = ScaleFunction::tabulated(samples).unwrap();
        let c = numeric_check(&t, GrowthMode::Subpower, horizon, &[0.25]).unwrap();
        assert_eq!(c.subpower, Verdict::No);
    }

    #[test]
    fn numeric_check_rejects_bad_inputs() {
        assert!(matches!(
            numeric_check(&ScaleFunction::identity(), GrowthMode::Subpower, 1e6, &[]),
            Err(ScaleError::EmptyGrid)
        ));
        let t = ScaleFunction::tabulated(vec![(1.0, 1.0), (10.0, 3.0)]).unwrap();
        assert!(matches!(
            numeric_check(&t, GrowthMode::Subpower, 1e6, &[0.5]),
            Err(ScaleError::HorizonBeyondTable { .. })
        ));
    }

    #[test]
    fn psi_forward_closed_form() {
        // phi = x/2 gives psi(x) = (1+x)^(1/2) - 1
        let psi = psi_forward(&mono(0.5, 1.0, 0));
        for x in [3.0, 8.0, 99.0] {
            let expect = (1.0 + x).sqrt() - 1.0;
            assert!((psi.eval(x).unwrap() - expect).abs() < 1e-12);
        }
        // phi = ln(e+x): the wrap is subpower on the window
        let psi = psi_forward(&mono(1.0, 0.0, 1));
        let c = numeric_check(&psi, GrowthMode::Subpower, 1e6, &[1.0, 0.5, 0.25]).unwrap();
        assert_eq!(c.subpower, Verdict::Yes);
    }

    #[test]
    fn psi_backward_zero_function() {
        let psi = psi_backward(&ScaleFunction::constant(0.0), 3, 1e4).unwrap();
        match &psi {
            ScaleFunction::PiecewiseSlope { thresholds } => {
                assert_eq!(thresholds.len(), 3);
                // 1 < x^(1/n) holds just beyond 1, so thresholds sit at the
                // first grid step and are nudged to strictly increase
                for t in thresholds {
                    assert!(*t > 1.0 && *t < 1.2, "threshold {t}");
                }
                assert!(thresholds[0] < thresholds[1] && thresholds[1] < thresholds[2]);
            }
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn psi_backward_log_thresholds_pinned() {
        // regression constants produced by the geometric threshold scan
        // (start 1.0, ratio 1.05) for phi = ln(e+x), depth 2
        let psi = psi_backward(&mono(1.0, 0.0, 1), 2, 1e6).unwrap();
        match &psi {
            ScaleFunction::PiecewiseSlope { thresholds } => {
                assert_eq!(thresholds.len(), 2);
                let c1 = thresholds[0];
                let c2 = thresholds[1];
                // c1: smallest grid point with 1 + ln(e+x) < x beyond it
                assert!((c1 - 2.785962590401996).abs() < 1e-9, "c1 = {c1}");
                // c2: smallest grid point with 1 + ln(e+x) < sqrt(x) beyond it
                assert!((c2 - 15.379841976921681).abs() < 1e-9, "c2 = {c2}");
                // contract: beyond each threshold the sampled inequality holds
                for (i, &c) in thresholds.iter().enumerate() {
                    let n = (i + 1) as f64;
                    let mut x = c * 1.01;
                    while x < 1e6 {
                        let lhs = 1.0 + mono(1.0, 0.0, 1).eval(x).unwrap();
                        assert!(lhs < x.powf(1.0 / n), "x={x} n={n}");
                        x *= 1.3;
                    }
                }
            }
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn psi_backward_sqrt_fails_at_n2() {
        match psi_backward(&mono(1.0, 0.5, 0), 3, 1e6) {
            Err(ScaleError::ThresholdNotFound { n, .. }) => assert!(n >= 2),
            other => panic!("expected threshold failure, got {other:?}"),
        }
    }

    #[test]
    fn parse_round_trips() {
        let cases = [
            "mono(1.0,0.0,1)",
            "mono(0.5,1.0,0)",
            "mono(1.0,1.0,-1)",
            "sum(mono(1.0,0.0,2),mono(0.5,2.0,0))",
            "explogwrap(mono(1.0,0.0,1))",
            "piecewise(2.5,15.0,300.0)",
            "tab(1.0,1.0,10.0,3.0)",
        ];
        for c in cases {
            let f = parse(c).unwrap();
            assert_eq!(f.to_string(), c);
            assert_eq!(parse(&f.to_string()).unwrap(), f);
        }
    }

    #[test]
    fn parse_errors_carry_position() {
        match parse("mno(1,0,1)") {
            Err(ScaleError::Parse { pos, .. }) => assert_eq!(pos, 0),
            other => panic!("expected parse error, got {other:?}"),
        }
        match parse("sum(mono(1,0,1)") {
            Err(ScaleError::Parse { pos, .. }) => assert_eq!(pos, 15),
            other => panic!("expected parse error, got {other:?}"),
        }
        assert!(parse("piecewise(5,3)").is_err());
        assert!(parse("mono(-1,0,0)").is_err());
    }

    /// Independent slow oracle: scans far beyond the production horizon
    /// with a coarser ratio and an explicit threshold search.
    fn oracle_eventually_below(
        f: &ScaleFunction,
        bound: impl Fn(f64) -> f64,
        horizon: f64,
    ) -> bool {
        let mut last_violation = f64::NAN;
        let mut x = 1.5;
        while x < horizon {
            if !(f.eval(x).unwrap() < bound(x)) {
                last_violation = x;
            }
            x *= 1.3;
        }
        // eventually below iff violations stop well before the horizon
        last_violation.is_nan() || last_violation < horizon / 1e3
    }

    #[test]
    fn monomial_regression_set_matches_oracle() {
        // beta in {-1, 0, 1/2, 1, 2} x k in {0, 1, 2}: symbolic verdicts
        // match the analytic rule, and the far-horizon numeric oracle
        // agrees with every definite verdict.
        for &beta in &[-1.0, 0.0, 0.5, 1.0, 2.0] {
            for k in 0..=2 {
                let f = mono(1.0, beta, k);
                let c = classify(&f);
                assert_eq!(c.subpower == Verdict::Yes, beta <= 0.0, "beta={beta} k={k}");
                assert_eq!(c.sublinear == Verdict::Yes, beta < 1.0, "beta={beta} k={k}");
                // oracle horizons far beyond the crossover points
                let alpha_ok = [1.0, 0.5, 0.25, 0.125]
                    .iter()
                    .all(|&a| oracle_eventually_below(&f, |x| x.powf(a), 1e60));
                assert_eq!(alpha_ok, beta <= 0.0, "oracle subpower beta={beta} k={k}");
                let c_ok = [2.0, 1.0, 0.5, 0.25, 0.125]
                    .iter()
                    .all(|&cc| oracle_eventually_below(&f, |x| cc * x, 1e60));
                assert_eq!(c_ok, beta < 1.0, "oracle sublinear beta={beta} k={k}");
            }
        }
    }

    #[test]
    fn classification_hierarchy_holds() {
        let funcs = [
            mono(1.0, -1.0, 2),
            mono(1.0, 0.0, 0),
            mono(1.0, 0.0, 2),
            mono(1.0, 0.5, 1),
            mono(1.0, 1.0, 0),
            mono(1.0, 1.0, -1),
            mono(3.0, 2.0, 0),
            ScaleFunction::piecewise(vec![2.0, 20.0]).unwrap(),
            psi_forward(&mono(1.0, 0.0, 1)),
        ];
        for f in &funcs {
            let c = classify(f);
            if c.subpower == Verdict::Yes {
                assert_eq!(c.sublinear, Verdict::Yes, "{f}");
            }
            if c.sublinear == Verdict::No {
                assert_ne!(c.subpower, Verdict::Yes, "{f}");
            }
        }
    }
}
