//! Test-only oracles: central finite differences evaluated in `f64`.
#![allow(dead_code)]

use lagr::rng::{seeded, Rng};
use lagr::tensor::{ParamStore, Tape, Var};
use rand::Rng as _;

/// Step for inputs, which are perturbed in `f64`.
pub const FD_STEP: f64 = 1e-5;
/// Step for parameters, which are stored in `f32` and need a coarser step.
pub const FD_STEP_F32: f64 = 1e-3;

/// Relative error with a small floor so that components whose true value is
/// essentially zero are judged on absolute error.
pub fn rel_err(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-2)
}

pub type Build = fn(&mut Tape<'_, f64>, &[Var]) -> lagr::Result<Var>;

pub struct OpCase {
    pub name: &'static str,
    pub shapes: Vec<Vec<usize>>,
    pub build: Build,
}

/// Contract a tensor with fixed pseudo-random weights so every output entry
/// carries a distinct upstream gradient.
pub fn weighted_sum(tape: &mut Tape<'_, f64>, y: Var) -> lagr::Result<Var> {
    let shape = tape.shape(y).to_vec();
    let n: usize = shape.iter().product();
    let mut rng = seeded(0xfeed);
    let w: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let w = tape.input(shape, w, false)?;
    let p = tape.mul(y, w)?;
    Ok(tape.sum(p))
}

pub fn random_inputs(shapes: &[Vec<usize>], rng: &mut Rng) -> Vec<Vec<f64>> {
    shapes
        .iter()
        .map(|s| {
            let n: usize = s.iter().product();
            (0..n)
                .map(|_| {
                    // keep away from the ReLU kink
                    let x: f64 = rng.random_range(0.05..1.5);
                    if rng.random_bool(0.5) { x } else { -x }
                })
                .collect()
        })
        .collect()
}

fn eval(shapes: &[Vec<usize>], data: &[Vec<f64>], build: Build) -> f64 {
    let store = ParamStore::new();
    let mut tape = Tape::<f64>::new(&store);
    let vars: Vec<Var> = shapes
        .iter()
        .zip(data)
        .map(|(s, d)| tape.input(s.clone(), d.clone(), true).unwrap())
        .collect();
    let loss = build(&mut tape, &vars).unwrap();
    tape.scalar(loss)
}

/// Max relative error between the tape's gradient and central differences,
/// over every input entry.
pub fn check_inputs(shapes: &[Vec<usize>], data: &[Vec<f64>], build: Build) -> f64 {
    let store = ParamStore::new();
    let mut tape = Tape::<f64>::new(&store);
    let vars: Vec<Var> = shapes
        .iter()
        .zip(data)
        .map(|(s, d)| tape.input(s.clone(), d.clone(), true).unwrap())
        .collect();
    let loss = build(&mut tape, &vars).unwrap();
    let grads = tape.backward(loss).unwrap();

    let mut worst: f64 = 0.0;
    for (which, var) in vars.iter().enumerate() {
        let analytic = grads.wrt(*var).map(<[f64]>::to_vec);
        for i in 0..data[which].len() {
            let mut plus = data.to_vec();
            plus[which][i] += FD_STEP;
            let mut minus = data.to_vec();
            minus[which][i] -= FD_STEP;
            let numeric = (eval(shapes, &plus, build) - eval(shapes, &minus, build)) / (2.0 * FD_STEP);
            let a = analytic.as_ref().map_or(0.0, |g| g[i]);
            worst = worst.max(rel_err(a, numeric));
        }
    }
    worst
}

/// Max relative error of parameter gradients against central differences.
/// Parameters live in `f32`, so the step actually taken is recomputed from
/// the stored values.
pub fn check_params<F>(store: &mut ParamStore, loss_of: F) -> f64
where
    F: Fn(&ParamStore) -> (f64, Option<lagr::tensor::Gradients<f64>>),
{
    let (_, grads) = loss_of(store);
    let grads = grads.expect("analytic pass returns gradients");
    let analytic: Vec<Vec<f64>> = store
        .iter()
        .map(|(id, p)| {
            grads
                .param(id)
                .map(<[f64]>::to_vec)
                .unwrap_or_else(|| vec![0.0; p.tensor.numel()])
        })
        .collect();
    drop(grads);

    let ids: Vec<_> = store.iter().map(|(id, _)| id).collect();
    let mut worst: f64 = 0.0;
    for (pi, id) in ids.into_iter().enumerate() {
        for (i, &expected) in analytic[pi].iter().enumerate() {
            let orig = store.get(id).tensor.data()[i];
            let up = orig + FD_STEP_F32 as f32;
            let down = orig - FD_STEP_F32 as f32;
            store.get_mut(id).tensor.data_mut()[i] = up;
            let fp = loss_of(store).0;
            store.get_mut(id).tensor.data_mut()[i] = down;
            let fm = loss_of(store).0;
            store.get_mut(id).tensor.data_mut()[i] = orig;
            let numeric = (fp - fm) / (up as f64 - down as f64);
            worst = worst.max(rel_err(expected, numeric));
        }
    }
    worst
}

fn unary(name: &'static str, shape: Vec<usize>, build: Build) -> OpCase {
    OpCase {
        name,
        shapes: vec![shape],
        build,
    }
}

/// One case per differentiable tape operation.
pub fn op_cases() -> Vec<OpCase> {
    vec![
        OpCase {
            name: "matmul",
            shapes: vec![vec![3, 4], vec![4, 2]],
            build: |t, v| {
                let y = t.matmul(v[0], v[1])?;
                weighted_sum(t, y)
            },
        },
        OpCase {
            name: "matmul_t",
            shapes: vec![vec![3, 4], vec![5, 4]],
            build: |t, v| {
                let y = t.matmul_t(v[0], v[1])?;
                weighted_sum(t, y)
            },
        },
        OpCase {
            name: "add",
            shapes: vec![vec![2, 3], vec![2, 3]],
            build: |t, v| {
                let y = t.add(v[0], v[1])?;
                weighted_sum(t, y)
            },
        },
        OpCase {
            name: "add_row",
            shapes: vec![vec![3, 4], vec![4]],
            build: |t, v| {
                let y = t.add_row(v[0], v[1])?;
                weighted_sum(t, y)
            },
        },
        OpCase {
            name: "mul",
            shapes: vec![vec![2, 3], vec![2, 3]],
            build: |t, v| {
                let y = t.mul(v[0], v[1])?;
                weighted_sum(t, y)
            },
        },
        unary("scale", vec![2, 3], |t, v| {
            let y = t.scale(v[0], -1.7);
            weighted_sum(t, y)
        }),
        OpCase {
            name: "concat_rows",
            shapes: vec![vec![2, 3], vec![1, 3]],
            build: |t, v| {
                let y = t.concat(&[v[0], v[1]], 0)?;
                weighted_sum(t, y)
            },
        },
        OpCase {
            name: "concat_cols",
            shapes: vec![vec![2, 3], vec![2, 2]],
            build: |t, v| {
                let y = t.concat(&[v[0], v[1]], 1)?;
                weighted_sum(t, y)
            },
        },
        OpCase {
            name: "stack_last",
            shapes: vec![vec![2, 3], vec![2, 3], vec![2, 3]],
            build: |t, v| {
                let y = t.stack(v, 2)?;
                weighted_sum(t, y)
            },
        },
        unary("transpose", vec![3, 2], |t, v| {
            let y = t.transpose(v[0])?;
            weighted_sum(t, y)
        }),
        unary("softmax", vec![2, 4], |t, v| {
            let y = t.softmax(v[0]);
            weighted_sum(t, y)
        }),
        unary("log_softmax", vec![2, 4], |t, v| {
            let y = t.log_softmax(v[0]);
            weighted_sum(t, y)
        }),
        OpCase {
            name: "layer_norm",
            shapes: vec![vec![3, 5], vec![5], vec![5]],
            build: |t, v| {
                let y = t.layer_norm(v[0], v[1], v[2], 1e-5)?;
                weighted_sum(t, y)
            },
        },
        unary("embedding", vec![4, 3], |t, v| {
            let y = t.embedding(v[0], &[2, 0, 2, 3])?;
            weighted_sum(t, y)
        }),
        unary("dropout", vec![3, 4], |t, v| {
            let mut rng = seeded(11);
            let y = t.dropout(v[0], 0.3, &mut rng);
            weighted_sum(t, y)
        }),
        unary("relu", vec![3, 4], |t, v| {
            let y = t.relu(v[0]);
            weighted_sum(t, y)
        }),
        unary("gelu", vec![3, 4], |t, v| {
            let y = t.gelu(v[0]);
            weighted_sum(t, y)
        }),
        unary("slice", vec![3, 5], |t, v| {
            let y = t.slice(v[0], 1, 1, 3)?;
            weighted_sum(t, y)
        }),
        unary("reshape", vec![2, 6], |t, v| {
            let y = t.reshape(v[0], vec![3, 4])?;
            weighted_sum(t, y)
        }),
        unary("sum", vec![2, 3], |t, v| Ok(t.sum(v[0]))),
        unary("pick", vec![3, 4], |t, v| {
            let y = t.pick(v[0], &[1, 3, 0])?;
            weighted_sum(t, y)
        }),
    ]
}
