//! Gradient checks for every graph operator at random points.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::gradcheck::{gradcheck, GradcheckReport, DEFAULT_EPSILON};
use crate::graph::{Graph, Mode, NodeId};
use crate::params::{ParamId, ParamStore};
use crate::tensor::Tensor;

fn random(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Tensor<f64> {
    let data = (0..rows * cols).map(|_| rng.gen_range(-1.0..1.0)).collect();
    Tensor::matrix(rows, cols, data).expect("sized")
}

/// Builds a case: parameters from `shapes`, a random projection of the
/// operator output to a scalar, then runs the check.
fn case<F>(seed: u64, shapes: &[(usize, usize)], mode: Mode, op: F) -> Result<GradcheckReport>
where
    F: Fn(&mut Graph<f64>, &[NodeId]) -> Result<NodeId>,
{
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut store = ParamStore::new();
    let ids: Vec<ParamId> = shapes
        .iter()
        .enumerate()
        .map(|(i, &(r, c))| store.add(format!("in{i}"), random(&mut rng, r, c)))
        .collect::<Result<_>>()?;
    let weight_seed = rng.gen::<u64>();
    gradcheck(&store, mode, DEFAULT_EPSILON, |g| {
        let inputs: Vec<NodeId> = ids.iter().map(|&id| g.param(id)).collect();
        let y = op(g, &inputs)?;
        let (r, c) = (g.value(y).rows(), g.value(y).cols());
        let mut wr = ChaCha8Rng::seed_from_u64(weight_seed);
        let weighted = g.mul_const(y, random(&mut wr, r, c))?;
        Ok(g.sum(weighted))
    })
}

/// Runs every operator check; returns `(operator, report)` pairs.
pub fn op_gradchecks() -> Result<Vec<(&'static str, GradcheckReport)>> {
    let eval = Mode::Eval;
    let mut out = Vec::new();
    out.push(("matmul", case(1, &[(3, 4), (4, 2)], eval, |g, x| g.matmul(x[0], x[1]))?));
    out.push(("matmul_bt", case(2, &[(3, 4), (5, 4)], eval, |g, x| g.matmul_bt(x[0], x[1]))?));
    out.push(("transpose", case(3, &[(3, 2)], eval, |g, x| Ok(g.transpose(x[0])))?));
    out.push(("add", case(4, &[(2, 3), (2, 3)], eval, |g, x| g.add(x[0], x[1]))?));
    out.push(("add_row", case(5, &[(4, 3), (1, 3)], eval, |g, x| g.add_row(x[0], x[1]))?));
    out.push(("mul", case(6, &[(2, 3), (2, 3)], eval, |g, x| g.mul(x[0], x[1]))?));
    out.push(("scale", case(7, &[(2, 3)], eval, |g, x| Ok(g.scale(x[0], -1.7)))?));
    out.push(("tanh", case(8, &[(3, 3)], eval, |g, x| Ok(g.tanh(x[0])))?));
    out.push(("relu", case(9, &[(3, 3)], eval, |g, x| Ok(g.relu(x[0])))?));
    out.push(("sigmoid", case(10, &[(3, 3)], eval, |g, x| Ok(g.sigmoid(x[0])))?));
    out.push((
        "concat_cols",
        case(11, &[(3, 2), (3, 1), (3, 4)], eval, |g, x| g.concat_cols(x))?,
    ));
    out.push(("concat_rows", case(12, &[(1, 3), (2, 3)], eval, |g, x| g.concat_rows(x))?));
    out.push(("slice_cols", case(13, &[(3, 5)], eval, |g, x| g.slice_cols(x[0], 1, 3))?));
    out.push((
        "select_rows",
        case(14, &[(5, 3)], eval, |g, x| g.select_rows(x[0], &[4, 0, 4, 2]))?,
    ));
    for (width, seed) in [(1usize, 15u64), (2, 16), (3, 17), (4, 18)] {
        let name = ["conv1d_w1", "conv1d_w2", "conv1d_w3", "conv1d_w4"][width - 1];
        out.push((
            name,
            case(seed, &[(5, 3), (width * 3, 2), (1, 2)], eval, move |g, x| {
                g.conv1d(x[0], x[1], x[2], width)
            })?,
        ));
    }
    out.push(("max_rows", case(19, &[(6, 4)], eval, |g, x| Ok(g.max_rows(x[0])))?));
    out.push(("sum_rows", case(20, &[(6, 4)], eval, |g, x| Ok(g.sum_rows(x[0])))?));
    out.push(("sum", case(21, &[(3, 4)], eval, |g, x| Ok(g.sum(x[0])))?));
    out.push(("softmax_rows", case(22, &[(3, 5)], eval, |g, x| Ok(g.softmax_rows(x[0])))?));
    out.push((
        "layer_norm",
        case(23, &[(3, 5), (1, 5), (1, 5)], eval, |g, x| g.layer_norm(x[0], x[1], x[2]))?,
    ));
    out.push((
        "softmax_cross_entropy",
        case(24, &[(4, 3)], eval, |g, x| g.softmax_cross_entropy(x[0], &[0, 2, 1, 2]))?,
    ));
    out.push((
        "dropout",
        case(25, &[(4, 5)], Mode::Train { seed: 99 }, |g, x| g.dropout(x[0], 0.5))?,
    ));
    out.push((
        "linear",
        case(26, &[(3, 4), (4, 2), (1, 2)], eval, |g, x| g.linear(x[0], x[1], x[2]))?,
    ));
    out.push((
        "lstm_step",
        case(27, &[(1, 12), (1, 3), (1, 3), (3, 12)], eval, |g, x| {
            let (h, c) = g.lstm_step(x[0], x[1], x[2], x[3])?;
            g.concat_cols(&[h, c])
        })?,
    ));
    out.push((
        "attention",
        case(28, &[(4, 3), (4, 3), (4, 2)], eval, |g, x| Ok(g.attention(x[0], x[1], x[2], 0.0)?.0))?,
    ));
    out.push((
        "graph_conv",
        case(29, &[(4, 3), (3, 2), (1, 2)], eval, |g, x| {
            let adj = Tensor::matrix(
                4,
                4,
                vec![
                    0.5, 0.5, 0.0, 0.0, //
                    1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0, 0.0, //
                    0.0, 1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0, //
                    0.0, 0.0, 0.5, 0.5,
                ],
            )?;
            let a = g.input(adj);
            g.graph_conv(a, x[0], x[1], x[2])
        })?,
    ));
    Ok(out)
}
