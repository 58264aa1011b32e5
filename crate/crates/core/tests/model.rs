use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use grl_mad::grlnet::{BackboneSpec, GrlNet, LevelOutputs, OutputGrads};
use grl_mad::image::Image;

fn tiny() -> BackboneSpec {
    BackboneSpec {
        levels: 3,
        channels: vec![2, 3, 4],
        aligned_dim: 4,
        num_classes: 2,
        input_size: 8,
    }
}

fn random_image(rng: &mut ChaCha8Rng, size: usize) -> Image {
    Image::from_raw(size, size, (0..size * size * 3).map(|_| rng.gen()).collect()).unwrap()
}

/// Random linear functional of every output, used as a scalar test loss.
fn probe(o: &LevelOutputs, g: &OutputGrads) -> f64 {
    let heads: f64 = o.heads().iter().zip(&g.heads).map(|(h, w)| h[0] * w[0] + h[1] * w[1]).sum();
    let emb: f64 = o.embeddings().iter().zip(&g.embeddings).map(|(e, w)| e.iter().zip(w).map(|(a, b)| a * b).sum::<f64>()).sum();
    heads + emb
}

fn random_grads(rng: &mut ChaCha8Rng, spec: &BackboneSpec) -> OutputGrads {
    let mut g = OutputGrads::zeros(spec);
    g.heads.iter_mut().for_each(|h| *h = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)]);
    g.embeddings.iter_mut().flatten().for_each(|v| *v = rng.gen_range(-1.0..1.0));
    g
}

#[test]
fn parameter_gradients_match_finite_differences() {
    let spec = tiny();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut model = GrlNet::new(&spec, 3).unwrap();
    let img = random_image(&mut rng, 8);
    let w = random_grads(&mut rng, &spec);
    model.zero_grad();
    let (_, cache) = model.forward_cached(&img).unwrap();
    model.backward(&cache, &w);
    let analytic: Vec<Vec<f64>> = model.params().iter().map(|p| p.grad.clone()).collect();
    let h = 1e-5;
    let n_params = analytic.len();
    for pi in 0..n_params {
        let len = analytic[pi].len();
        for _ in 0..3 {
            let k = rng.gen_range(0..len);
            let orig = model.params()[pi].value[k];
            model.params_mut()[pi].value[k] = orig + h;
            let up = probe(&model.forward(&img).unwrap(), &w);
            model.params_mut()[pi].value[k] = orig - h;
            let down = probe(&model.forward(&img).unwrap(), &w);
            model.params_mut()[pi].value[k] = orig;
            let num = (up - down) / (2.0 * h);
            let a = analytic[pi][k];
            assert!((a - num).abs() <= 1e-4 * a.abs().max(num.abs()).max(1e-3), "param {pi}[{k}]: {a} vs {num}");
        }
    }
}

#[test]
fn every_level_receives_gradient() {
    let spec = tiny();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut model = GrlNet::new(&spec, 4).unwrap();
    let img = random_image(&mut rng, 8);
    let w = random_grads(&mut rng, &spec);
    model.zero_grad();
    let (_, cache) = model.forward_cached(&img).unwrap();
    model.backward(&cache, &w);
    for (i, p) in model.params().iter().enumerate() {
        assert!(p.grad.iter().any(|g| *g != 0.0), "param tensor {i} got no gradient");
    }
}

#[test]
fn batch_forward_equals_single_forward() {
    let spec = tiny();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let model = GrlNet::new(&spec, 5).unwrap();
    let imgs: Vec<Image> = (0..4).map(|_| random_image(&mut rng, 8)).collect();
    let batch = model.forward_batch(&imgs).unwrap();
    for (img, b) in imgs.iter().zip(&batch) {
        assert_eq!(&model.forward(img).unwrap(), b);
    }
}

#[test]
fn stripped_model_ignores_auxiliary_heads() {
    let spec = tiny();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let model = GrlNet::new(&spec, 6).unwrap();
    let img = random_image(&mut rng, 8);
    let stripped = model.strip_inference();
    assert_eq!(stripped.logits(&img).unwrap(), model.forward(&img).unwrap().logits_final);
    assert!(stripped.param_count() < model.param_count());
}

#[test]
fn wrong_input_size_is_rejected() {
    let model = GrlNet::new(&tiny(), 7).unwrap();
    let img = Image::new(9, 9);
    assert!(model.forward(&img).is_err());
}
