//! Central-difference gradient checks for tape operations.

use rand::Rng as _;

use super::{Tape, Tensor, Var};
use crate::error::Result;
use crate::rng::{rng_from_seed, Rng};

pub const FD_STEP: f64 = 1e-4;
pub const REL_TOL: f64 = 1e-4;

/// Entries with magnitude in [0.1, 1) and random sign, clear of relu's kink.
pub fn random_tensor(shape: &[usize], rng: &mut Rng) -> Tensor {
    let mut t = Tensor::zeros(shape);
    t.data_mut().iter_mut().for_each(|x| {
        let mag: f64 = rng.random_range(0.1..1.0);
        *x = if rng.random_bool(0.5) { mag } else { -mag };
    });
    t
}

pub type Build = dyn Fn(&mut Tape, &[Var]) -> Result<Var> + Send + Sync;

fn scalar_objective(inputs: &[Tensor], weights: &Tensor, build: &Build) -> f64 {
    let mut tape = Tape::new();
    let vars: Vec<Var> = inputs.iter().map(|t| tape.constant(t.clone())).collect();
    let out = build(&mut tape, &vars).expect("objective builds");
    tape.value(out)
        .data()
        .iter()
        .zip(weights.data())
        .map(|(a, b)| a * b)
        .sum()
}

/// Max relative error between tape gradients and central differences of
/// `sum(w ⊙ build(inputs))` for random weights `w`.
pub fn max_rel_error(inputs: Vec<Tensor>, build: &Build, rng: &mut Rng) -> f64 {
    let mut tape = Tape::new();
    let vars: Vec<Var> = inputs.iter().map(|t| tape.leaf(t.clone())).collect();
    let out = build(&mut tape, &vars).expect("objective builds");
    let weights = random_tensor(tape.shape(out), rng);
    let w = tape.constant(weights.clone());
    let prod = tape.mul(out, w).expect("same shape");
    let loss = tape.sum(prod);
    let grads = tape.backward(loss).expect("scalar loss");

    let mut worst = 0.0f64;
    for (i, input) in inputs.iter().enumerate() {
        let analytic = grads
            .get(vars[i])
            .map(<[f64]>::to_vec)
            .unwrap_or_else(|| vec![0.0; input.len()]);
        for (j, &a) in analytic.iter().enumerate() {
            let mut plus = inputs.clone();
            plus[i].data_mut()[j] += FD_STEP;
            let mut minus = inputs.clone();
            minus[i].data_mut()[j] -= FD_STEP;
            let numeric = (scalar_objective(&plus, &weights, build) - scalar_objective(&minus, &weights, build))
                / (2.0 * FD_STEP);
            let err = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-6);
            worst = worst.max(err);
        }
    }
    worst
}

pub struct OpCase {
    pub name: &'static str,
    pub shapes: Vec<Vec<usize>>,
    pub build: Box<Build>,
}

fn case(
    name: &'static str,
    shapes: &[&[usize]],
    build: impl Fn(&mut Tape, &[Var]) -> Result<Var> + Send + Sync + 'static,
) -> OpCase {
    OpCase {
        name,
        shapes: shapes.iter().map(|s| s.to_vec()).collect(),
        build: Box::new(build),
    }
}

/// One case per differentiable tape operation.
pub fn op_cases() -> Vec<OpCase> {
    vec![
        case("add", &[&[2, 3, 4], &[3, 4]], |t, v| t.add(v[0], v[1])),
        case("sub", &[&[2, 1, 4], &[3, 1]], |t, v| t.sub(v[0], v[1])),
        case("mul", &[&[2, 3, 1], &[4]], |t, v| t.mul(v[0], v[1])),
        case("scale", &[&[5]], |t, v| Ok(t.scale(v[0], -2.5))),
        case("matmul", &[&[2, 3, 4], &[4, 5]], |t, v| t.matmul(v[0], v[1])),
        case("bmm", &[&[2, 3, 4], &[2, 4, 2]], |t, v| t.bmm(v[0], v[1])),
        case("relu", &[&[3, 4]], |t, v| Ok(t.relu(v[0]))),
        case("sigmoid", &[&[3, 4]], |t, v| Ok(t.sigmoid(v[0]))),
        case("exp", &[&[3, 4]], |t, v| Ok(t.exp(v[0]))),
        case("log", &[&[6]], |t, v| {
            let e = t.exp(v[0]);
            Ok(t.log(e))
        }),
        case("softmax", &[&[3, 5]], |t, v| t.softmax(v[0])),
        case("log_softmax", &[&[3, 5]], |t, v| t.log_softmax(v[0])),
        case("layer_norm", &[&[3, 6]], |t, v| t.layer_norm(v[0], 1e-5)),
        case("embedding", &[&[4, 3]], |t, v| t.embedding(v[0], &[2, 0, 2, 3])),
        case("concat", &[&[2, 1, 3], &[2, 2, 3]], |t, v| t.concat(&[v[0], v[1]], 1)),
        case("masked_fill", &[&[2, 4]], |t, v| {
            t.masked_fill(v[0], &[false, true, false, true], -7.0)
        }),
        case("sum", &[&[2, 3]], |t, v| Ok(t.sum(v[0]))),
        case("mean", &[&[2, 3]], |t, v| Ok(t.mean(v[0]))),
        case("reshape", &[&[2, 3]], |t, v| t.reshape(v[0], &[3, 2])),
        case("permute", &[&[2, 3, 4]], |t, v| t.permute(v[0], &[2, 0, 1])),
    ]
}

#[derive(Debug, Clone, PartialEq)]
pub struct OpReport {
    pub name: &'static str,
    pub seeds: u64,
    pub max_rel_error: f64,
}

/// Worst relative error of `case` over seeds `0..seeds`.
pub fn check_op(case: &OpCase, seeds: u64) -> OpReport {
    let mut worst = 0.0f64;
    for seed in 0..seeds {
        let mut rng = rng_from_seed(seed);
        let inputs = case.shapes.iter().map(|s| random_tensor(s, &mut rng)).collect();
        worst = worst.max(max_rel_error(inputs, &*case.build, &mut rng));
    }
    OpReport {
        name: case.name,
        seeds,
        max_rel_error: worst,
    }
}
