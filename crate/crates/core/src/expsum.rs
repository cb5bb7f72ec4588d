//! Exponential polynomials `f(s) = sum_k (a_k + b_k s) exp(-r_k s)`.
//!
//! Between two events every current in a neuron (synaptic output, AHP,
//! membrane) is such a sum, so the state can be evaluated in closed form and
//! threshold crossings located exactly.
//!
//! Root isolation uses the generalized Descartes bound: with `w = sum (deg_k + 1)`,
//! `f` has at most `w - 1` real roots, and `f' + r_0 f` has weight `w - 1`.
//! Its sign changes split the axis into intervals where `f` is monotone,
//! and each interval is bisected.

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Term {
    pub rate: f64,
    pub c0: f64,
    pub c1: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ExpSum {
    terms: Vec<Term>,
}

/// Rates closer than this (relative to `1 / tau`) are treated as resonant.
const RESONANCE_TOL: f64 = 1e-7;

impl ExpSum {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn constant(c: f64) -> Self {
        let mut s = Self::zero();
        s.push(0.0, c, 0.0);
        s
    }

    /// `c * exp(-rate * s)`.
    pub fn exp(c: f64, rate: f64) -> Self {
        let mut s = Self::zero();
        s.push(rate, c, 0.0);
        s
    }

    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    pub fn push(&mut self, rate: f64, c0: f64, c1: f64) {
        if c0 == 0.0 && c1 == 0.0 {
            return;
        }
        if let Some(t) = self.terms.iter_mut().find(|t| t.rate == rate) {
            t.c0 += c0;
            t.c1 += c1;
        } else {
            self.terms.push(Term { rate, c0, c1 });
        }
    }

    pub fn add(mut self, other: &ExpSum) -> Self {
        for t in &other.terms {
            self.push(t.rate, t.c0, t.c1);
        }
        self
    }

    pub fn scale(mut self, k: f64) -> Self {
        for t in &mut self.terms {
            t.c0 *= k;
            t.c1 *= k;
        }
        self.terms.retain(|t| t.c0 != 0.0 || t.c1 != 0.0);
        self
    }

    pub fn add_const(mut self, c: f64) -> Self {
        self.push(0.0, c, 0.0);
        self
    }

    pub fn eval(&self, s: f64) -> f64 {
        self.terms
            .iter()
            .map(|t| (t.c0 + t.c1 * s) * (-t.rate * s).exp())
            .sum()
    }

    pub fn derivative(&self) -> ExpSum {
        let mut d = ExpSum::zero();
        for t in &self.terms {
            d.push(t.rate, t.c1 - t.rate * t.c0, -t.rate * t.c1);
        }
        d
    }

    fn weight(&self) -> usize {
        self.terms
            .iter()
            .map(|t| if t.c1 != 0.0 { 2 } else { 1 })
            .sum()
    }

    /// `f' + r_0 f`, which shares its sign with `d/ds (f exp(r_0 s))`.
    fn reduced(&self) -> ExpSum {
        let r0 = self.terms[0].rate;
        let mut g = ExpSum::zero();
        for t in &self.terms {
            if t.rate == r0 {
                // the leading term loses one degree; never form 0 * c
                g.push(t.rate, t.c1, 0.0);
            } else {
                let dr = r0 - t.rate;
                g.push(t.rate, dr * t.c0 + t.c1, dr * t.c1);
            }
        }
        g
    }

    pub fn is_finite(&self) -> bool {
        self.terms
            .iter()
            .all(|t| t.rate.is_finite() && t.c0.is_finite() && t.c1.is_finite())
    }

    /// Points in `(a, b)` where `f` changes sign, ascending.
    pub fn sign_changes(&self, a: f64, b: f64) -> Vec<f64> {
        let pieces = self.monotone_pieces(a, b);
        let mut out = Vec::new();
        for w in pieces.windows(2) {
            let (p, q) = (w[0], w[1]);
            let (fp, fq) = (self.eval(p), self.eval(q));
            if fp < 0.0 && fq >= 0.0 {
                out.push(bisect(|s| self.eval(s), p, q));
            } else if fp > 0.0 && fq <= 0.0 {
                out.push(bisect(|s| -self.eval(s), p, q));
            }
        }
        out
    }

    /// Breakpoints `a = p_0 < p_1 < ... < p_n = b` such that `f` is monotone on each piece.
    fn monotone_pieces(&self, a: f64, b: f64) -> Vec<f64> {
        let mut pts = vec![a];
        if self.weight() > 1 {
            pts.extend(
                self.reduced()
                    .sign_changes(a, b)
                    .into_iter()
                    .filter(|&c| c > a && c < b),
            );
        }
        pts.push(b);
        pts.dedup();
        pts
    }

    /// Earliest `s` in `[0, s_max]` with `f(s) >= 0`.
    pub fn first_nonnegative(&self, s_max: f64) -> Option<f64> {
        if self.eval(0.0) >= 0.0 {
            return Some(0.0);
        }
        let pieces = self.monotone_pieces(0.0, s_max);
        for w in pieces.windows(2) {
            let (p, q) = (w[0], w[1]);
            if self.eval(q) >= 0.0 {
                return Some(bisect(|s| self.eval(s), p, q));
            }
        }
        None
    }
}

/// Smallest `s` in `(lo, hi]` with `f(s) >= 0`, given `f(lo) < 0 <= f(hi)`
/// and `f` monotone in between.
fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    loop {
        if hi - lo <= hi.abs() * 1e-15 + 1e-21 {
            return hi;
        }
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            return hi;
        }
        if f(mid) >= 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
}

/// Response of `tau y' + y = gain * u(s)` with `y(0) = y0`.
///
/// `u` may only hold pure exponential terms (`c1 == 0`), which is all a
/// chain of first-order filters driven by piecewise-constant inputs needs.
pub fn first_order_response(y0: f64, input: &ExpSum, gain: f64, tau: f64) -> ExpSum {
    let rate_m = 1.0 / tau;
    let mut y = ExpSum::zero();
    let mut homogeneous = y0;
    for t in input.terms() {
        debug_assert!(t.c1 == 0.0, "cascade input must be pure exponentials");
        let detune = 1.0 - t.rate * tau;
        if detune.abs() < RESONANCE_TOL {
            // resonant: particular solution gain*c/tau * s * exp(-s/tau)
            y.push(rate_m, 0.0, gain * t.c0 / tau);
        } else {
            let a = gain * t.c0 / detune;
            y.push(t.rate, a, 0.0);
            homogeneous -= a;
        }
    }
    y.push(rate_m, homogeneous, 0.0);
    y
}
