use transpath::nn::{train, Mlp};
use transpath::rng::{stream, uniform_in};
use transpath::Mlp64;

fn line_data(n: usize) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let xs: Vec<Vec<f64>> = (0..n).map(|i| vec![-1.0 + 2.0 * i as f64 / (n - 1) as f64]).collect();
    (xs.clone(), xs)
}

#[test]
fn fits_y_equals_x() {
    let (x, y) = line_data(50);
    let mut net = Mlp64::new(&[1, 8, 1], 0).unwrap();
    let r = train(&mut net, &x, &y, None, 2000, 1e-3).unwrap();
    assert!(r.train_loss <= 1e-3, "{}", r.train_loss);
    assert_eq!(r.history.len(), 2000);
    assert!(r.history.iter().all(|l| l.is_finite()));
}

#[test]
fn convex_probe_loss_never_rises_across_a_window() {
    // affine model, least squares: convex in the parameters
    let mut rng = stream(7, 0);
    let x: Vec<Vec<f64>> = (0..200).map(|_| vec![uniform_in(&mut rng, -1.0, 1.0), uniform_in(&mut rng, -1.0, 1.0)]).collect();
    let y: Vec<Vec<f64>> = x.iter().map(|v| vec![0.7 * v[0] - 1.3 * v[1] + 0.2 + 0.05 * uniform_in(&mut rng, -1.0, 1.0)]).collect();
    for lr in [1e-3, 1e-2] {
        let mut net = Mlp64::new(&[2, 1], 3).unwrap();
        let r = train(&mut net, &x, &y, None, 3000, lr).unwrap();
        for i in 0..r.history.len() - 100 {
            // equality up to rounding once converged
            assert!(r.history[i + 100] <= r.history[i] * (1.0 + 1e-12), "lr {lr}: epoch {i}: {} -> {}", r.history[i], r.history[i + 100]);
        }
    }
}

#[test]
fn same_seed_same_history() {
    let (x, y) = line_data(30);
    let run = |seed: u64| {
        let mut net = Mlp64::new(&[1, 6, 6, 1], seed).unwrap();
        let r = train(&mut net, &x, &y, Some((&x[..10], &y[..10])), 300, 1e-2).unwrap();
        (net, r)
    };
    let (na, ra) = run(4);
    let (nb, rb) = run(4);
    assert_eq!(na, nb);
    assert_eq!(ra.history, rb.history);
    assert_eq!(ra.val_loss, rb.val_loss);
    assert_ne!(run(5).1.history, ra.history);
}

#[test]
fn single_and_double_precision_agree_early() {
    let (x, y) = line_data(20);
    let mut a = Mlp::<f64>::new(&[1, 4, 1], 1).unwrap();
    let mut b = Mlp::<f32>::new(&[1, 4, 1], 1).unwrap();
    let ra = train(&mut a, &x, &y, None, 50, 1e-2).unwrap();
    let rb = train(&mut b, &x, &y, None, 50, 1e-2).unwrap();
    assert!((ra.train_loss - rb.train_loss).abs() <= 1e-3 * ra.train_loss, "{} vs {}", ra.train_loss, rb.train_loss);
}

#[test]
fn nan_targets_abort() {
    let (x, mut y) = line_data(10);
    y[3][0] = f64::NAN;
    let mut net = Mlp64::new(&[1, 4, 1], 0).unwrap();
    assert!(train(&mut net, &x, &y, None, 10, 1e-3).is_err());
}
