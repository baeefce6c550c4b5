//! Fits a small network to a toy function with Adam and round-trips the
//! checkpoint.

use tugwar::neural::{Adam, Mlp, MlpSpec};

fn main() -> tugwar::Result<()> {
    let mut net = Mlp::init(MlpSpec::three_layer(2, 16, 1), 0)?;
    let xs: Vec<Vec<f64>> = (0..64).map(|i| vec![(i % 8) as f64 / 8.0, (i / 8) as f64 / 8.0]).collect();
    let ys: Vec<Vec<f64>> = xs.iter().map(|x| vec![x[0] * x[1] + 0.5 * x[0]]).collect();
    let mut adam = Adam::new(1e-2);
    for epoch in 0..=400 {
        let loss = net.train_step(&mut adam, &xs, &ys)?;
        if epoch % 100 == 0 {
            println!("epoch {epoch:3}: mse {loss:.6}");
        }
    }
    let path = std::env::temp_dir().join("tugwar_example.ckpt");
    net.save(&path)?;
    let back = Mlp::load(&path)?;
    println!("checkpoint {} bytes, identical after reload: {}", std::fs::metadata(&path)?.len(), back == net);
    Ok(())
}
