//! JPEG-cycle and print-scan a face; print the distortion of each.

use grl_mad::postops::{jpeg_cycle, print_scan_sim};
use grl_mad::synthface::{render_face, sample_identity, NuisanceDistribution};

fn main() -> grl_mad::Result<()> {
    let face = render_face(&sample_identity(3), &NuisanceDistribution::source().sample(3, 64), 64)?;
    for q in [95, 75, 50, 20] {
        let j = jpeg_cycle(&face.image, q, 64)?;
        println!("jpeg q{q:<3} PSNR {:.2} dB", j.psnr(&face.image));
    }
    let small = jpeg_cycle(&face.image, 50, 32)?;
    println!("q50 at 32 px -> {}x{}", small.width(), small.height());
    let ps = print_scan_sim(&face.image, 0);
    println!("print-scan PSNR {:.2} dB", ps.psnr(&face.image));
    Ok(())
}
