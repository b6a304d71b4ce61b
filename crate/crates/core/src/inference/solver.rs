use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use super::atoms::Atom;
use super::program::SoftLogicProgram;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    /// Stop once a full round improves the objective by less than this.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            tol: 1e-4,
            max_iter: 5000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Solution {
    /// Truth of every target atom.
    pub truths: BTreeMap<Atom, f64>,
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Objective at the start and after every iteration.
    pub history: Vec<f64>,
}

impl Solution {
    pub fn truth(&self, atom: &Atom) -> Option<f64> {
        self.truths.get(atom).copied()
    }
}

/// A rule as `weight * max(0, constant + sum coef_i * x_i)`.
///
/// With Łukasiewicz conjunction and `head >= 0`,
/// `max(0, max(0, sum body - (n - 1)) - head)` equals
/// `max(0, sum body - (n - 1) - head)`, so every rule is one hinge.
#[derive(Debug, Clone)]
struct Hinge {
    weight: f64,
    constant: f64,
    coefs: Vec<(usize, f64)>,
}

impl Hinge {
    fn linear(&self, x: &[f64]) -> f64 {
        self.constant + self.coefs.iter().map(|&(i, c)| c * x[i]).sum::<f64>()
    }

    fn value(&self, x: &[f64]) -> f64 {
        self.weight * self.linear(x).max(0.0)
    }
}

struct Compiled {
    n: usize,
    hinges: Vec<Hinge>,
    /// Hinges touching each variable, with the variable's coefficient.
    by_var: Vec<Vec<(usize, f64)>>,
}

impl Compiled {
    fn new(program: &SoftLogicProgram) -> Self {
        let index: HashMap<&Atom, usize> = program
            .targets
            .iter()
            .enumerate()
            .map(|(i, a)| (a, i))
            .collect();
        let n = program.targets.len();
        let mut hinges = Vec::with_capacity(program.rules.len());
        for rule in &program.rules {
            let mut constant = -(rule.body.len() as f64 - 1.0);
            let mut coefs: BTreeMap<usize, f64> = BTreeMap::new();
            let mut add = |atom: &Atom, sign: f64| match index.get(atom) {
                Some(&i) => *coefs.entry(i).or_insert(0.0) += sign,
                None => constant += sign * program.observed.get(atom).copied().unwrap_or(0.0),
            };
            for atom in &rule.body {
                add(atom, 1.0);
            }
            add(&rule.head, -1.0);
            hinges.push(Hinge {
                weight: rule.weight,
                constant,
                coefs: coefs.into_iter().filter(|&(_, c)| c != 0.0).collect(),
            });
        }
        let mut by_var = vec![Vec::new(); n];
        for (h, hinge) in hinges.iter().enumerate() {
            for &(i, c) in &hinge.coefs {
                by_var[i].push((h, c));
            }
        }
        Compiled { n, hinges, by_var }
    }

    fn objective(&self, x: &[f64]) -> f64 {
        self.hinges.iter().map(|h| h.value(x)).sum()
    }

    /// Exactly minimizes the objective over `x[i]` in [0, 1] with the other
    /// coordinates fixed. The restriction is convex piecewise linear, so a
    /// minimizer lies on an endpoint or a breakpoint.
    fn coordinate_step(&self, x: &mut [f64], i: usize) {
        let terms: Vec<(f64, f64, f64)> = self.by_var[i]
            .iter()
            .map(|&(h, c)| {
                let hinge = &self.hinges[h];
                let rest = hinge.linear(x) - c * x[i];
                (hinge.weight, rest, c)
            })
            .collect();
        let f = |t: f64| -> f64 {
            terms
                .iter()
                .map(|&(w, r, c)| w * (r + c * t).max(0.0))
                .sum()
        };
        let mut best_t = x[i];
        let mut best = f(best_t);
        let candidates = [0.0, 1.0]
            .into_iter()
            .chain(terms.iter().map(|&(_, r, c)| -r / c))
            .filter(|t| (0.0..=1.0).contains(t));
        for t in candidates {
            let v = f(t);
            if v < best - 1e-15 {
                best = v;
                best_t = t;
            }
        }
        x[i] = best_t;
    }

    /// Projected subgradient direction followed by an exact line search on
    /// the piecewise-linear objective over the step length in [0, 1].
    fn gradient_step(&self, x: &mut [f64]) {
        let mut g = vec![0.0; self.n];
        for h in &self.hinges {
            if h.linear(x) > 0.0 {
                for &(i, c) in &h.coefs {
                    g[i] += h.weight * c;
                }
            }
        }
        let scale = g.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if scale == 0.0 {
            return;
        }
        let d: Vec<f64> = x
            .iter()
            .zip(&g)
            .map(|(&xi, &gi)| (xi - gi / scale).clamp(0.0, 1.0) - xi)
            .collect();

        // g(a) = sum w max(0, l + a m); walk breakpoints while the slope is
        // negative.
        let mut slope = 0.0;
        let mut breaks: Vec<(f64, f64)> = Vec::new();
        for h in &self.hinges {
            let l = h.linear(x);
            let m: f64 = h.coefs.iter().map(|&(i, c)| c * d[i]).sum();
            if l > 0.0 || (l == 0.0 && m > 0.0) {
                slope += h.weight * m;
            }
            if m != 0.0 {
                let a = -l / m;
                if a > 0.0 && a < 1.0 {
                    breaks.push((a, h.weight * m.abs()));
                }
            }
        }
        breaks.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut alpha = 1.0;
        if slope >= 0.0 {
            alpha = 0.0;
        } else {
            for (a, bump) in breaks {
                slope += bump;
                if slope >= 0.0 {
                    alpha = a;
                    break;
                }
            }
        }
        if alpha > 0.0 {
            let before = self.objective(x);
            let trial: Vec<f64> = x
                .iter()
                .zip(&d)
                .map(|(&xi, &di)| (xi + alpha * di).clamp(0.0, 1.0))
                .collect();
            if self.objective(&trial) <= before {
                x.copy_from_slice(&trial);
            }
        }
    }
}

impl Compiled {
    /// Consensus ADMM over hinge potentials. Each hinge keeps a local copy
    /// of its variables; the consensus point is the clamped mean of copies
    /// plus scaled duals. Returns the consensus point after every
    /// iteration through `visit` and stops once both residuals are below
    /// `tol` (true) or the budget runs out (false).
    fn admm(
        &self,
        x: &mut [f64],
        rho: f64,
        tol: f64,
        budget: usize,
        visit: &mut dyn FnMut(&[f64]),
    ) -> (usize, bool) {
        let mut z: Vec<Vec<f64>> = self
            .hinges
            .iter()
            .map(|h| h.coefs.iter().map(|&(i, _)| x[i]).collect())
            .collect();
        let mut u: Vec<Vec<f64>> = z.iter().map(|zj| vec![0.0; zj.len()]).collect();
        let copies: Vec<usize> = self.by_var.iter().map(Vec::len).collect();
        let total_copies: usize = copies.iter().sum::<usize>().max(1);
        let scale = (total_copies as f64).sqrt();
        let mut sum = vec![0.0; self.n];
        for it in 1..=budget {
            for (j, h) in self.hinges.iter().enumerate() {
                // v = x - u; minimize w max(0, c + a.z) + rho/2 |z - v|^2.
                let v: Vec<f64> = h
                    .coefs
                    .iter()
                    .zip(&u[j])
                    .map(|(&(i, _), uj)| x[i] - uj)
                    .collect();
                let lin = |z: &[f64]| {
                    h.constant
                        + h.coefs
                            .iter()
                            .zip(z)
                            .map(|(&(_, a), zi)| a * zi)
                            .sum::<f64>()
                };
                let zj = &mut z[j];
                if lin(&v) <= 0.0 {
                    zj.copy_from_slice(&v);
                    continue;
                }
                let step = h.weight / rho;
                for ((zi, vi), &(_, a)) in zj.iter_mut().zip(&v).zip(&h.coefs) {
                    *zi = vi - step * a;
                }
                if lin(zj) < 0.0 {
                    let norm2: f64 = h.coefs.iter().map(|&(_, a)| a * a).sum();
                    let l = lin(&v);
                    for ((zi, vi), &(_, a)) in zj.iter_mut().zip(&v).zip(&h.coefs) {
                        *zi = vi - l / norm2 * a;
                    }
                }
            }
            sum.iter_mut().for_each(|s| *s = 0.0);
            for (j, h) in self.hinges.iter().enumerate() {
                for (k, &(i, _)) in h.coefs.iter().enumerate() {
                    sum[i] += z[j][k] + u[j][k];
                }
            }
            let mut dual = 0.0;
            for i in 0..self.n {
                let next = if copies[i] == 0 {
                    0.0
                } else {
                    (sum[i] / copies[i] as f64).clamp(0.0, 1.0)
                };
                dual += copies[i] as f64 * (next - x[i]).powi(2);
                x[i] = next;
            }
            let mut primal = 0.0;
            for (j, h) in self.hinges.iter().enumerate() {
                for (k, &(i, _)) in h.coefs.iter().enumerate() {
                    let r = z[j][k] - x[i];
                    u[j][k] += r;
                    primal += r * r;
                }
            }
            visit(x);
            if primal.sqrt() <= tol * scale && rho * dual.sqrt() <= tol * scale {
                return (it, true);
            }
        }
        (budget, false)
    }
}

/// Minimizes the weighted hinge objective over target truths in [0, 1],
/// starting from all-zero truths.
///
/// A descent phase alternates a projected subgradient step (exact line
/// search) with a sweep of exact coordinate minimizations until a round
/// gains less than `tol`. Descent alone can stall at a kink where only a
/// joint move of several truths helps, so a consensus ADMM phase follows,
/// started from the descent point. The reported solution is an incumbent:
/// an ADMM iterate replaces it only if it lowers the objective, and is
/// then polished by a coordinate sweep. `history` therefore never
/// increases, and `converged` means the ADMM residuals fell below `tol`.
pub fn solve(program: &SoftLogicProgram, config: &SolverConfig) -> Solution {
    let compiled = Compiled::new(program);
    let mut x = vec![0.0; compiled.n];
    let mut objective = compiled.objective(&x);
    let mut history = vec![objective];
    let mut iterations = 0;
    while iterations < config.max_iter {
        iterations += 1;
        compiled.gradient_step(&mut x);
        for i in 0..compiled.n {
            compiled.coordinate_step(&mut x, i);
        }
        let next = compiled.objective(&x);
        history.push(next);
        let improvement = objective - next;
        objective = next;
        if improvement < config.tol {
            break;
        }
    }

    let mut incumbent = x.clone();
    let converged;
    if iterations < config.max_iter && compiled.n > 0 && objective > 0.0 {
        let max_weight = compiled.hinges.iter().fold(1.0f64, |m, h| m.max(h.weight));
        let mut best = objective;
        let (used, ok) = compiled.admm(
            &mut x,
            max_weight,
            config.tol,
            config.max_iter - iterations,
            &mut |candidate| {
                let value = compiled.objective(candidate);
                if value < best {
                    let mut polished = candidate.to_vec();
                    for i in 0..compiled.n {
                        compiled.coordinate_step(&mut polished, i);
                    }
                    best = compiled.objective(&polished);
                    incumbent = polished;
                }
                history.push(best);
            },
        );
        iterations += used;
        converged = ok;
        objective = best;
    } else {
        converged = iterations < config.max_iter || objective == 0.0;
    }
    Solution {
        truths: program.targets.iter().cloned().zip(incumbent).collect(),
        objective,
        iterations,
        converged,
        history,
    }
}

/// The objective at given target truths; absent targets count as 0.
pub fn objective_at(program: &SoftLogicProgram, truths: &BTreeMap<Atom, f64>) -> f64 {
    let compiled = Compiled::new(program);
    let x: Vec<f64> = program
        .targets
        .iter()
        .map(|a| truths.get(a).copied().unwrap_or(0.0))
        .collect();
    compiled.objective(&x)
}
