//! Restyle a face with both style-transfer modes and report color moments.

use grl_mad::stylemix::{color_moments, color_wct, fourier_mix, ism_augment, StyleSpec};
use grl_mad::synthface::{render_face, sample_identity, NuisanceDistribution};

fn main() -> grl_mad::Result<()> {
    let content = render_face(&sample_identity(1), &NuisanceDistribution::source().sample(1, 64), 64)?;
    let style = render_face(&sample_identity(2), &NuisanceDistribution::shifted().sample(2, 64), 64)?;

    let wct = color_wct(&content.image, &style.image, 1e-5);
    let fda = fourier_mix(&content.image, &style.image, 0.1)?;
    let (mc, _) = color_moments(&content.image);
    let (ms, _) = color_moments(&style.image);
    let (mw, _) = color_moments(&wct);
    println!("content mean {:.3?}", mc.as_slice());
    println!("style mean   {:.3?}", ms.as_slice());
    println!("wct mean     {:.3?}", mw.as_slice());
    println!("fourier mix mean abs change {:.4}", fda.mean_abs_diff(&content.image));

    let aug = ism_augment(&content, std::slice::from_ref(&style.image), &StyleSpec::default(), 0)?;
    println!("{} domain={} label={}", aug.id, aug.domain, aug.label.as_str());
    Ok(())
}
