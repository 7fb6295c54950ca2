//! One-dimensional Gauss–Legendre rules and composite rules on geometrically
//! graded panels.
//!
//! Velocity integrands here decay algebraically over many decades and can
//! carry a sharp feature of width `1/(K r)` around the drift point, so panels
//! double in width away from a chosen centre.

use std::f64::consts::PI;

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "Gauss-Legendre order must be positive");
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let m = n.div_ceil(2);
        for i in 0..m {
            // Tricomi initial guess, then Newton on P_n.
            let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre(n, x);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        if n % 2 == 1 {
            nodes[n / 2] = 0.0;
        }
        Self { nodes, weights }
    }

    /// Integrates `f` over `[a, b]`.
    pub fn integrate(&self, a: f64, b: f64, mut f: impl FnMut(f64) -> f64) -> f64 {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (b + a);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(x, w)| w * f(mid + half * x))
            .sum::<f64>()
            * half
    }
}

/// `(P_n(x), P_n'(x))` by the three-term recurrence.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Flattened composite rule: abscissae and weights.
#[derive(Debug, Clone, Default)]
pub struct Rule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl Rule {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn integrate(&self, mut f: impl FnMut(f64) -> f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(x))
            .sum()
    }

    fn push_panel(&mut self, gl: &GaussLegendre, a: f64, b: f64) {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (b + a);
        for (x, w) in gl.nodes.iter().zip(&gl.weights) {
            self.nodes.push(mid + half * x);
            self.weights.push(w * half);
        }
    }
}

/// Panel edges `0, s, 2s, 4s, …` clipped at `length`.
fn graded_edges(length: f64, first: f64) -> Vec<f64> {
    let mut edges = vec![0.0];
    if length <= 0.0 {
        return edges;
    }
    let mut x = first.min(length);
    loop {
        edges.push(x);
        if x >= length {
            break;
        }
        x = (2.0 * x).min(length);
    }
    edges
}

/// Composite rule on `[0, length]` with panels doubling from `first`.
pub fn graded_half_line(gl: &GaussLegendre, length: f64, first: f64) -> Rule {
    let mut rule = Rule::default();
    let edges = graded_edges(length, first);
    for w in edges.windows(2) {
        rule.push_panel(gl, w[0], w[1]);
    }
    rule
}

/// Composite rule on `[lo, hi]` with panels graded symmetrically away from
/// `center` (clamped into the interval). Node placement is mirror-symmetric
/// about `center` wherever both sides are present.
pub fn graded_interval(gl: &GaussLegendre, lo: f64, hi: f64, center: f64, first: f64) -> Rule {
    let c = center.clamp(lo, hi);
    let left = graded_edges(c - lo, first);
    let right = graded_edges(hi - c, first);
    let mut rule = Rule::default();
    for w in left.windows(2).rev() {
        rule.push_panel(gl, c - w[1], c - w[0]);
    }
    for w in right.windows(2) {
        rule.push_panel(gl, c + w[0], c + w[1]);
    }
    rule
}
