//! Morph two synthetic identities and self-morph one of them; writes PNGs.

use grl_mad::morphkit::{cross_morph, delaunay, random_transform_bank, self_morph, MorphSpec};
use grl_mad::synthface::{render_instance, CorpusConfig};

fn main() -> grl_mad::Result<()> {
    let out = std::env::temp_dir().join("grl-morph-pair");
    std::fs::create_dir_all(&out).map_err(|e| grl_mad::Error::io(&out, e))?;
    let cfg = CorpusConfig::default();
    let a0 = render_instance(&cfg, 0, 0)?;
    let a1 = render_instance(&cfg, 0, 1)?;
    let b0 = render_instance(&cfg, 1, 0)?;

    let mesh = delaunay(&a0.landmarks)?;
    println!("mesh over {} landmarks: {} triangles", a0.landmarks.len(), mesh.triangles.len());

    let cross = cross_morph(&a0, &b0, &MorphSpec::plain(0.5, 1))?;
    let ops = random_transform_bank(7);
    println!("self-morph pre-augmentation: {ops:?}");
    let spec = MorphSpec {
        pre_augment_ops: ops,
        ..MorphSpec::plain(0.5, 7)
    };
    let selfm = self_morph(&a0, &a1, &spec)?;
    for s in [&a0, &b0, &cross, &selfm] {
        let p = out.join(format!("{}.png", s.id));
        s.image.save_png(&p)?;
        println!("{} -> {}", s.id, p.display());
    }
    println!("PSNR(cross, a0) = {:.2} dB", cross.image.psnr(&a0.image));
    Ok(())
}
