mod common;

#[test]
fn analytic_gradients_match_central_differences() {
    for seed in 0..20 {
        let net = common::random_small_net(seed);
        let err = common::gradient_check(&net, seed + 1000, 1e-5, 1e-7);
        assert!(err < 1e-4, "seed {seed}: relative error {err:e} for {:?}", net.spec());
    }
}
