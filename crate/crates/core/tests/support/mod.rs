//! Independent reference implementations used as test oracles.
#![allow(dead_code)]

use std::collections::{BTreeMap, HashSet};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rai_audit::source::Fixture;
use rai_audit::tree::{CrawlStats, Origin, RootTerm, SuggestionTree, TreeNode};

// ---------------------------------------------------------------- OLS

pub struct ExactFit {
    pub beta: Vec<f64>,
    pub stderr: Vec<f64>,
    pub t: Vec<f64>,
    pub p: Vec<f64>,
}

fn rat(v: f64) -> BigRational {
    BigRational::from_float(v).expect("finite input")
}

/// Normal equations solved in exact rational arithmetic; only the final
/// square root and the t tail are taken in floating point.
pub fn exact_ols(columns: &[Vec<f64>], y: &[f64]) -> ExactFit {
    let p = columns.len();
    let n = y.len();
    let x: Vec<Vec<BigRational>> = columns.iter().map(|c| c.iter().map(|v| rat(*v)).collect()).collect();
    let yr: Vec<BigRational> = y.iter().map(|v| rat(*v)).collect();
    let dot = |a: &[BigRational], b: &[BigRational]| {
        a.iter().zip(b).fold(BigRational::zero(), |acc, (u, v)| acc + u * v)
    };
    // augmented [X'X | I | X'y]
    let mut m: Vec<Vec<BigRational>> = (0..p)
        .map(|i| {
            let mut row: Vec<BigRational> = (0..p).map(|j| dot(&x[i], &x[j])).collect();
            row.extend((0..p).map(|j| {
                if i == j {
                    BigRational::from_integer(BigInt::from(1))
                } else {
                    BigRational::zero()
                }
            }));
            row.push(dot(&x[i], &yr));
            row
        })
        .collect();
    for col in 0..p {
        let pivot = (col..p).find(|&r| !m[r][col].is_zero()).expect("full rank");
        m.swap(col, pivot);
        let inv = BigRational::from_integer(BigInt::from(1)) / m[col][col].clone();
        for v in m[col].iter_mut() {
            *v = &*v * &inv;
        }
        for r in 0..p {
            if r != col && !m[r][col].is_zero() {
                let f = m[r][col].clone();
                let pivot_row = m[col].clone();
                for (v, pv) in m[r].iter_mut().zip(&pivot_row) {
                    *v = &*v - &f * pv;
                }
            }
        }
    }
    let beta: Vec<BigRational> = (0..p).map(|i| m[i][2 * p].clone()).collect();
    let ssr = (0..n).fold(BigRational::zero(), |acc, i| {
        let fit = (0..p).fold(BigRational::zero(), |a, j| a + &x[j][i] * &beta[j]);
        let r = &yr[i] - fit;
        acc + &r * &r
    });
    let dof = n - p;
    let sigma2 = ssr / BigRational::from_integer(BigInt::from(dof));
    let mut out = ExactFit {
        beta: Vec::new(),
        stderr: Vec::new(),
        t: Vec::new(),
        p: Vec::new(),
    };
    for j in 0..p {
        let var = &sigma2 * &m[j][p + j];
        let se = var.to_f64().unwrap().sqrt();
        let b = beta[j].to_f64().unwrap();
        let t = b / se;
        out.beta.push(b);
        out.stderr.push(se);
        out.t.push(t);
        out.p.push(t_two_sided_by_quadrature(t, dof as f64));
    }
    out
}

// ----------------------------------------------------------- t tail

#[allow(clippy::too_many_arguments)]
fn simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, eps: f64, depth: u32) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * eps {
        return left + right + delta / 15.0;
    }
    simpson(f, a, m, fa, flm, fm, left, eps / 2.0, depth - 1)
        + simpson(f, m, b, fm, frm, fb, right, eps / 2.0, depth - 1)
}

pub fn integrate(f: &dyn Fn(f64) -> f64, a: f64, b: f64, eps: f64) -> f64 {
    if a >= b {
        return 0.0;
    }
    let (fa, fb, fm) = (f(a), f(b), f(0.5 * (a + b)));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson(f, a, b, fa, fm, fb, whole, eps, 60)
}

/// P(|T| >= |t|) by integrating the t density after x = sqrt(dof) tan(θ),
/// which turns it into cos^(dof-1) on a finite interval.
pub fn t_two_sided_by_quadrature(t: f64, dof: f64) -> f64 {
    if t.is_infinite() {
        return 0.0;
    }
    let half_pi = std::f64::consts::FRAC_PI_2;
    let theta0 = (t.abs() / dof.sqrt()).atan();
    let f = |th: f64| th.cos().max(0.0).powf(dof - 1.0);
    let total = integrate(&f, 0.0, half_pi, 1e-15);
    // integrate the shorter side for accuracy
    if theta0 > half_pi / 2.0 {
        integrate(&f, theta0, half_pi, 1e-17) / total
    } else {
        1.0 - integrate(&f, 0.0, theta0, 1e-15) / total
    }
}

// ------------------------------------------------------- silhouette

pub fn silhouette_oracle(data: &[Vec<f64>], labels: &[usize]) -> f64 {
    let n = data.len();
    let dist: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| data[i].iter().zip(&data[j]).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt())
                .collect()
        })
        .collect();
    let mut members: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, l) in labels.iter().enumerate() {
        members.entry(*l).or_default().push(i);
    }
    let mut total = 0.0;
    for i in 0..n {
        let own = &members[&labels[i]];
        if own.len() == 1 {
            continue;
        }
        let a = own.iter().filter(|&&j| j != i).map(|&j| dist[i][j]).sum::<f64>() / (own.len() - 1) as f64;
        let b = members
            .iter()
            .filter(|(l, _)| **l != labels[i])
            .map(|(_, ms)| ms.iter().map(|&j| dist[i][j]).sum::<f64>() / ms.len() as f64)
            .fold(f64::INFINITY, f64::min);
        let m = a.max(b);
        if m > 0.0 {
            total += (b - a) / m;
        }
    }
    total / n as f64
}

// ------------------------------------------------------------ trees

/// Random suggestion graph over a pool of queries, cycles included.
pub struct RandomGraph {
    pub root: String,
    pub alphabet: Vec<char>,
    pub max_depth: usize,
    pub fixture: Fixture,
}

pub fn random_graph(seed: u64) -> RandomGraph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let root = "wurzel".to_string();
    let alphabet: Vec<char> = ('a'..='z').take(rng.random_range(0..=5)).collect();
    let pool_size = rng.random_range(5..=400);
    let mut pool: Vec<String> = (0..pool_size)
        .map(|i| {
            if rng.random_bool(0.7) {
                format!("{root} w{i}")
            } else {
                format!("x{i} y")
            }
        })
        .collect();
    pool.push(root.clone());
    let mut keys: Vec<String> = pool.clone();
    keys.extend(alphabet.iter().map(|c| format!("{root} {c}")));
    let mut map = BTreeMap::new();
    for k in keys {
        if rng.random_bool(0.15) {
            continue;
        }
        let n = rng.random_range(0..=10);
        let mut list: Vec<String> = (0..n).map(|_| pool[rng.random_range(0..pool.len())].clone()).collect();
        if rng.random_bool(0.05) {
            list.push(format!("{root} {}", alphabet.first().copied().unwrap_or('q')));
        }
        map.insert(k, list);
    }
    RandomGraph {
        root,
        alphabet,
        max_depth: rng.random_range(1..=8),
        fixture: Fixture(map),
    }
}

/// Brute-force breadth-first enumeration: (depth, query) of every node.
pub fn enumerate_bfs(g: &RandomGraph) -> Vec<(usize, String)> {
    let lookup = |q: &str| -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for s in g.fixture.0.get(q).into_iter().flatten() {
            if out.len() == 10 {
                break;
            }
            if !out.contains(s) {
                out.push(s.clone());
            }
        }
        out
    };
    let mut nodes = vec![(0, g.root.clone())];
    let mut frontier = vec![g.root.clone()];
    let mut expanded: HashSet<String> = HashSet::new();
    for depth in 0..g.max_depth {
        let mut next = Vec::new();
        for q in &frontier {
            if !expanded.insert(q.clone()) {
                continue;
            }
            for s in lookup(q) {
                nodes.push((depth + 1, s.clone()));
                next.push(s);
            }
        }
        if depth == 0 {
            let root_children = next.clone();
            for c in &g.alphabet {
                let seed = format!("{} {c}", g.root);
                if !root_children.contains(&seed) {
                    nodes.push((1, seed.clone()));
                    next.push(seed);
                }
            }
        }
        frontier = next;
    }
    nodes.sort();
    nodes
}

/// Random tree with a mix of on-topic and off-topic suggestions.
pub fn random_tree(seed: u64, root_term: &RootTerm) -> SuggestionTree {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    fn grow(rng: &mut ChaCha8Rng, depth: usize, max: usize, root: &str) -> Vec<TreeNode> {
        if depth > max {
            return Vec::new();
        }
        let n = rng.random_range(0..=4);
        (0..n)
            .map(|i| {
                let query = if rng.random_bool(0.75) {
                    format!("{root} t{depth}{i}")
                } else {
                    format!("other t{depth}{i}")
                };
                TreeNode {
                    query,
                    added_term: String::new(),
                    depth,
                    origin: Origin::Suggestion,
                    pruned: false,
                    children: grow(rng, depth + 1, max, root),
                }
            })
            .collect()
    }
    let max = rng.random_range(1..=5);
    let mut children = grow(&mut rng, 1, max, &root_term.canonical);
    for c in ['a', 'b'] {
        children.push(TreeNode {
            query: format!("{} {c}", root_term.canonical),
            added_term: String::new(),
            depth: 1,
            origin: Origin::LetterSeed,
            pruned: false,
            children: grow(&mut rng, 2, max, &root_term.canonical),
        });
    }
    SuggestionTree {
        root_term: root_term.clone(),
        root: TreeNode {
            query: root_term.canonical.clone(),
            added_term: String::new(),
            depth: 0,
            origin: Origin::Root,
            pruned: false,
            children,
        },
        max_depth: max,
        alphabet: vec!['a', 'b'],
        crawl_stats: CrawlStats::default(),
    }
}

/// Pass 1 marks suggestions lacking every variant; pass 2 pushes marks
/// down to all descendants. Returns pre-order flags.
pub fn prune_oracle(tree: &SuggestionTree, variants: &[String]) -> Vec<bool> {
    fn first(n: &TreeNode, variants: &[String], out: &mut Vec<bool>) {
        let q = n.query.to_lowercase();
        out.push(n.origin == Origin::Suggestion && !variants.iter().any(|v| q.contains(v.as_str())));
        for c in &n.children {
            first(c, variants, out);
        }
    }
    fn second(n: &TreeNode, marks: &mut [bool], idx: &mut usize, inherited: bool) {
        let me = *idx;
        *idx += 1;
        marks[me] |= inherited;
        let flag = marks[me];
        for c in &n.children {
            second(c, marks, idx, flag);
        }
    }
    let mut marks = Vec::new();
    first(&tree.root, variants, &mut marks);
    let mut idx = 0;
    second(&tree.root, &mut marks, &mut idx, false);
    marks
}
