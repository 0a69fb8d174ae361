use loadcnn::gradsuite::{random_sample, smooth_params};
use loadcnn::model::{
    default_config, forward, grad_check_model, head_features, loss, param_count, LoadCNNParams,
};
use loadcnn::Tensor;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn directional_gradient_matches_finite_differences() {
    let c = default_config();
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let params = smooth_params(&mut rng).unwrap();
    let sample = random_sample(&mut rng);
    let check = grad_check_model(&c, &params, &sample, 1e-5, 50, 5).unwrap();
    assert_eq!(check.directions, 50);
    assert!(check.max_error < 1e-4, "{check:?}");
}

#[test]
fn id_only_changes_touch_only_id_coordinates() {
    let c = default_config();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let params = smooth_params(&mut rng).unwrap();
    let a = random_sample(&mut rng);
    let mut b = a.clone();
    b.id_onehot = Tensor::from_fn(&[62], |i| if i == 3 || i == 40 { 1.0 } else { 0.0 });
    assert_ne!(a.id_onehot, b.id_onehot);

    let (ha, hb) = (head_features(&c, &params, &a).unwrap(), head_features(&c, &params, &b).unwrap());
    let channels = 1344 + 1344;
    for i in 0..ha.len() {
        let in_id = (channels..channels + 62).contains(&i);
        if !in_id {
            assert_eq!(ha.data()[i], hb.data()[i], "coordinate {i}");
        }
    }
    assert_ne!(&ha.data()[channels..channels + 62], &hb.data()[channels..channels + 62]);
}

#[test]
fn param_count_ignores_seed_and_seeds_differ() {
    let c = default_config();
    let a = LoadCNNParams::init(&c, 1).unwrap();
    let b = LoadCNNParams::init(&c, 2).unwrap();
    assert_eq!(a.count(), param_count(&c).unwrap());
    assert_eq!(b.count(), param_count(&c).unwrap());
    assert_ne!(a, b);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn forward_is_finite_and_deterministic(seed in any::<u64>()) {
        let c = default_config();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let params = LoadCNNParams::init(&c, seed).unwrap();
        let sample = random_sample(&mut rng);
        let y = forward(&c, &params, &sample).unwrap();
        prop_assert_eq!(y.shape(), &[48]);
        prop_assert!(y.all_finite());
        prop_assert_eq!(forward(&c, &params, &sample).unwrap(), y);
    }

    #[test]
    fn loss_is_symmetric_and_non_negative(
        p in prop::collection::vec(-5.0f64..5.0, 48),
        t in prop::collection::vec(-5.0f64..5.0, 48),
    ) {
        let (p, t) = (Tensor::from_vec(p), Tensor::from_vec(t));
        let l = loss(&p, &t).unwrap();
        prop_assert_eq!(l, loss(&t, &p).unwrap());
        prop_assert!(l >= 0.0);
        prop_assert_eq!(loss(&p, &p).unwrap(), 0.0);
    }
}
