//! Exact classification of tiny linear programs over the rationals, by
//! enumerating the vertices of the feasible region and of its recession
//! cone. Only for programs whose variables are all bounded below by zero.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use stackroute::lp::{LinearProgram, Relation, Sense};

type Q = BigRational;

fn q(v: i64) -> Q {
    Q::from_integer(BigInt::from(v))
}

#[derive(Debug, Clone, PartialEq)]
pub enum Exact {
    Infeasible,
    Unbounded,
    Optimal(Q),
}

/// Integer data of a program `opt c.x` subject to rows and `x >= 0`.
#[derive(Debug, Clone)]
pub struct SmallLp {
    pub sense: Sense,
    pub c: Vec<i64>,
    pub rows: Vec<(Vec<i64>, Relation, i64)>,
}

impl SmallLp {
    pub fn random(rng: &mut ChaCha8Rng) -> Self {
        let n = 3;
        let m = rng.gen_range(2..=4);
        let sense = if rng.gen_bool(0.5) {
            Sense::Minimize
        } else {
            Sense::Maximize
        };
        let c = (0..n).map(|_| rng.gen_range(-3..=3)).collect();
        let rows = (0..m)
            .map(|_| {
                let a = (0..n).map(|_| rng.gen_range(-4..=4)).collect();
                let rel = match rng.gen_range(0..5) {
                    0 | 1 => Relation::LessEq,
                    2 | 3 => Relation::GreaterEq,
                    _ => Relation::Equal,
                };
                (a, rel, rng.gen_range(-6..=8))
            })
            .collect();
        SmallLp { sense, c, rows }
    }

    pub fn to_lp(&self) -> LinearProgram {
        let mut lp = LinearProgram::new("small", self.sense);
        let vars: Vec<_> = self
            .c
            .iter()
            .enumerate()
            .map(|(j, &c)| lp.add_variable(format!("x{j}"), 0.0, f64::INFINITY, c as f64))
            .collect();
        for (i, (a, rel, b)) in self.rows.iter().enumerate() {
            lp.add_constraint(
                format!("r{i}"),
                a.iter().enumerate().map(|(j, &v)| (vars[j], v as f64)),
                *rel,
                *b as f64,
            );
        }
        lp
    }

    /// All constraints as `a.x <= b`, including `x >= 0`.
    fn halfspaces(&self) -> Vec<(Vec<Q>, Q)> {
        let n = self.c.len();
        let mut out = Vec::new();
        for (a, rel, b) in &self.rows {
            let a: Vec<Q> = a.iter().map(|&v| q(v)).collect();
            let neg: Vec<Q> = a.iter().map(|v| -v.clone()).collect();
            match rel {
                Relation::LessEq => out.push((a, q(*b))),
                Relation::GreaterEq => out.push((neg, q(-*b))),
                Relation::Equal => {
                    out.push((a, q(*b)));
                    out.push((neg, q(-*b)));
                }
            }
        }
        for j in 0..n {
            let mut a = vec![q(0); n];
            a[j] = q(-1);
            out.push((a, q(0)));
        }
        out
    }

    pub fn solve_exact(&self) -> Exact {
        let n = self.c.len();
        let sign = if self.sense == Sense::Minimize { 1 } else { -1 };
        let c: Vec<Q> = self.c.iter().map(|&v| q(sign * v)).collect();
        let hs = self.halfspaces();

        let mut best: Option<Q> = None;
        for pick in combinations(hs.len(), n) {
            let a: Vec<Vec<Q>> = pick.iter().map(|&i| hs[i].0.clone()).collect();
            let b: Vec<Q> = pick.iter().map(|&i| hs[i].1.clone()).collect();
            let Some(x) = solve(a, b) else { continue };
            if hs.iter().all(|(a, b)| dot(a, &x) <= *b) {
                let v = dot(&c, &x);
                if best.as_ref().is_none_or(|w| v < *w) {
                    best = Some(v);
                }
            }
        }
        let Some(best) = best else {
            return Exact::Infeasible;
        };

        // recession directions normalized to sum one
        let cone: Vec<Vec<Q>> = hs.iter().map(|(a, _)| a.clone()).collect();
        for pick in combinations(cone.len(), n - 1) {
            let mut a: Vec<Vec<Q>> = pick.iter().map(|&i| cone[i].clone()).collect();
            let mut b: Vec<Q> = vec![q(0); n - 1];
            a.push(vec![q(1); n]);
            b.push(q(1));
            let Some(d) = solve(a, b) else { continue };
            if cone.iter().all(|a| !dot(a, &d).is_positive()) && dot(&c, &d).is_negative() {
                return Exact::Unbounded;
            }
        }
        Exact::Optimal(best * q(sign))
    }
}

fn dot(a: &[Q], b: &[Q]) -> Q {
    a.iter().zip(b).fold(Q::zero(), |acc, (x, y)| acc + x * y)
}

fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::new();
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            rec(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    rec(0, n, k, &mut cur, &mut out);
    out
}

fn solve(mut a: Vec<Vec<Q>>, mut b: Vec<Q>) -> Option<Vec<Q>> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).find(|&r| !a[r][col].is_zero())?;
        a.swap(col, piv);
        b.swap(col, piv);
        for r in 0..n {
            if r != col && !a[r][col].is_zero() {
                let f = &a[r][col] / &a[col][col];
                for k in col..n {
                    let t = &f * &a[col][k];
                    a[r][k] -= t;
                }
                let t = &f * &b[col];
                b[r] -= t;
            }
        }
    }
    Some((0..n).map(|i| &b[i] / &a[i][i]).collect())
}

/// Outcome of the randomized classification suite.
#[derive(Debug, Default)]
pub struct SuiteReport {
    pub infeasible: usize,
    pub unbounded: usize,
    pub optimal: usize,
    pub failures: Vec<String>,
    pub worst_gap: f64,
}

/// Solves `count` random three-variable programs and compares each with the
/// exact classification.
pub fn run_suite(seed: u64, count: usize) -> SuiteReport {
    use num_traits::ToPrimitive;
    use stackroute::lp::{solve_lp, LpStatus};
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rep = SuiteReport::default();
    for i in 0..count {
        let small = SmallLp::random(&mut rng);
        let lp = small.to_lp();
        let exact = small.solve_exact();
        let sol = solve_lp(&lp).unwrap();
        match (&exact, sol.status) {
            (Exact::Infeasible, LpStatus::Infeasible) => rep.infeasible += 1,
            (Exact::Unbounded, LpStatus::Unbounded) => rep.unbounded += 1,
            (Exact::Optimal(v), LpStatus::Optimal) => {
                rep.optimal += 1;
                let v = v.to_f64().unwrap();
                if (sol.objective_value - v).abs() > 1e-6 * v.abs().max(1.0) {
                    rep.failures.push(format!(
                        "#{i}: objective {} but exact {v}",
                        sol.objective_value
                    ));
                }
                let gap = lp.duality_gap(&sol, 1e-7);
                rep.worst_gap = rep.worst_gap.max(gap);
                if !(gap <= 1e-6) {
                    rep.failures.push(format!("#{i}: duality gap {gap}"));
                }
            }
            (e, s) => rep
                .failures
                .push(format!("#{i}: exact {e:?} but solver {s:?} for {small:?}")),
        }
    }
    rep
}
