//! Random well-typed kernels with full seeds and bindings, for checking the
//! interpreters against each other.

use rand::seq::SliceRandom;
use rand::Rng;

use super::ast::{parse_kernel, KernelProgram};
use super::infer::{Kind, Orientation, Seed, Seeds};
use super::interp::{Bindings, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum G {
    Scalar,
    Row(usize),
    Col(usize),
    Mat(usize, usize),
}

impl G {
    fn transposed(self) -> G {
        match self {
            G::Row(n) => G::Col(n),
            G::Col(n) => G::Row(n),
            G::Mat(r, c) => G::Mat(c, r),
            G::Scalar => G::Scalar,
        }
    }
}

/// A random program with seeds fixing every variable's type and random
/// values for every variable.
#[derive(Debug, Clone)]
pub struct RandomKernel {
    pub text: String,
    pub program: KernelProgram,
    pub seeds: Seeds,
    pub bindings: Bindings,
}

struct Gen<'a, R: Rng> {
    rng: &'a mut R,
    sizes: Vec<usize>,
    vars: Vec<(String, G)>,
}

impl<R: Rng> Gen<'_, R> {
    fn new_var(&mut self, g: G) -> String {
        let prefix = match g {
            G::Scalar => "s",
            G::Row(_) | G::Col(_) => "v",
            G::Mat(..) => "M",
        };
        let name = format!("{prefix}{}", self.vars.len());
        self.vars.push((name.clone(), g));
        name
    }

    fn leaf(&mut self, g: G) -> String {
        if g == G::Scalar && self.rng.gen_bool(0.2) {
            return format!("{}", self.rng.gen_range(1..=4) as f64 * 0.5);
        }
        let existing: Vec<&String> = self.vars.iter().filter(|(_, v)| *v == g).map(|(n, _)| n).collect();
        match existing.choose(self.rng) {
            Some(n) if self.rng.gen_bool(0.5) => (*n).clone(),
            _ => self.new_var(g),
        }
    }

    fn dim(&mut self) -> usize {
        self.rng.gen_range(0..self.sizes.len())
    }

    /// Expression text of type `g` with at most `depth` operator levels.
    fn expr(&mut self, g: G, depth: usize) -> String {
        if depth == 0 || self.rng.gen_bool(0.25) {
            return self.leaf(g);
        }
        let d = depth - 1;
        match self.rng.gen_range(0..5) {
            0 => format!("({} + {})", self.expr(g, d), self.expr(g, d)),
            1 => format!("({} * {})", self.expr(G::Scalar, d), self.expr(g, d)),
            2 => format!("({} * {})", self.expr(g, d), self.expr(G::Scalar, d)),
            3 => format!("({})'", self.expr(g.transposed(), d)),
            _ => {
                let k = self.dim();
                let (a, b) = match g {
                    G::Col(r) => (G::Mat(r, k), G::Col(k)),
                    G::Row(c) => (G::Row(k), G::Mat(k, c)),
                    G::Scalar => (G::Row(k), G::Col(k)),
                    G::Mat(r, c) if self.rng.gen_bool(0.5) => (G::Col(r), G::Row(c)),
                    G::Mat(r, c) => (G::Mat(r, k), G::Mat(k, c)),
                };
                format!("({} * {})", self.expr(a, d), self.expr(b, d))
            }
        }
    }

    fn shape(&mut self) -> G {
        match self.rng.gen_range(0..4) {
            0 => G::Scalar,
            1 => G::Row(self.dim()),
            2 => G::Col(self.dim()),
            _ => {
                let r = self.dim();
                G::Mat(r, self.dim())
            }
        }
    }
}

/// Builds a program of 1 to 4 statements over up to three dimensions sized
/// `1..=max_dim`, each right-hand side at most `max_depth` operators deep.
pub fn random_kernel<R: Rng>(rng: &mut R, max_depth: usize, max_dim: usize) -> RandomKernel {
    let sizes = (0..3).map(|_| rng.gen_range(1..=max_dim.max(1))).collect();
    let mut g = Gen { rng, sizes, vars: Vec::new() };
    let mut lines = vec!["kernel random".to_string()];
    for _ in 0..g.rng.gen_range(1..=4) {
        let reuse = !g.vars.is_empty() && g.rng.gen_bool(0.3);
        let (target, shape) = if reuse {
            g.vars.choose(g.rng).cloned().expect("nonempty")
        } else {
            let s = g.shape();
            (String::new(), s)
        };
        let depth = g.rng.gen_range(0..=max_depth);
        let rhs = g.expr(shape, depth);
        let target = if reuse { target } else { g.new_var(shape) };
        lines.push(format!("{target} = {rhs}"));
    }
    let text = lines.join("\n") + "\n";
    let program = parse_kernel(&text).expect("generated text parses");
    let used = program.variables();
    let mut seeds = Seeds::new();
    let mut bindings = Bindings::new();
    for (name, shape) in &g.vars {
        if !used.contains(name) {
            continue;
        }
        let (seed, dims) = match *shape {
            G::Scalar => (Seed::kind(Kind::Scalar), vec![]),
            G::Row(n) => (Seed::vector(Orientation::Row), vec![g.sizes[n]]),
            G::Col(n) => (Seed::vector(Orientation::Column), vec![g.sizes[n]]),
            G::Mat(r, c) => (Seed::kind(Kind::Matrix), vec![g.sizes[r], g.sizes[c]]),
        };
        let len = dims.iter().product();
        let data = (0..len).map(|_| g.rng.gen_range(-1.0..1.0)).collect();
        seeds.insert(name.clone(), seed);
        bindings.insert(name.clone(), Tensor { shape: dims, data });
    }
    RandomKernel { text, program, seeds, bindings }
}
