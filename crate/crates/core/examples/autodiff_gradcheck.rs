//! Builds a small two-layer network on the tape, backpropagates a
//! cross-entropy loss and checks one weight gradient by central
//! differences, then takes a few Adam steps.

use semaug::autodiff::{Adam, Graph, Tensor};
use semaug::Result;

fn loss(g: &mut Graph, w1: &Tensor, w2: &Tensor, x: &Tensor, tracked: bool) -> Result<(f64, Vec<Tensor>)> {
    let (a, b) = if tracked {
        (g.param(w1.clone()), g.param(w2.clone()))
    } else {
        (g.constant(w1.clone()), g.constant(w2.clone()))
    };
    let xv = g.constant(x.clone());
    let h = g.matmul(xv, a)?;
    let h = g.relu(h)?;
    let logits = g.matmul(h, b)?;
    let l = g.cross_entropy(logits, &[0, 2, 1])?;
    let value = g.value(l).item();
    if !tracked {
        return Ok((value, vec![]));
    }
    g.backward(l)?;
    Ok((value, vec![g.grad(a).unwrap().clone(), g.grad(b).unwrap().clone()]))
}

fn main() -> Result<()> {
    let x = Tensor::matrix(3, 2, vec![1.0, -0.5, 0.3, 0.8, -1.2, 0.4])?;
    let mut w1 = Tensor::matrix(2, 4, (0..8).map(|i| 0.3 * ((i as f64) - 3.5).sin()).collect())?;
    let mut w2 = Tensor::matrix(4, 3, (0..12).map(|i| 0.4 * (i as f64).cos()).collect())?;

    let (l0, grads) = loss(&mut Graph::new(), &w1, &w2, &x, true)?;
    let h = 1e-6;
    let mut plus = w1.clone();
    plus.data_mut()[5] += h;
    let mut minus = w1.clone();
    minus.data_mut()[5] -= h;
    let numeric = (loss(&mut Graph::new(), &plus, &w2, &x, false)?.0
        - loss(&mut Graph::new(), &minus, &w2, &x, false)?.0)
        / (2.0 * h);
    println!("loss {l0:.6}");
    println!(
        "dL/dw1[5]: tape {:.8}, central difference {:.8}",
        grads[0].data()[5],
        numeric
    );

    let mut opt = Adam::new([w1.shape(), w2.shape()], 0.05);
    for step in 1..=50 {
        let (l, g) = loss(&mut Graph::new(), &w1, &w2, &x, true)?;
        opt.step(&mut [&mut w1, &mut w2], &g)?;
        if step % 10 == 0 {
            println!("step {step:2} loss {l:.6}");
        }
    }
    Ok(())
}
