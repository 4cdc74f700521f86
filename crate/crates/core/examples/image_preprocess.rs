//! From a cropped chromosome image to the fixed-length model input.

use homnet::data::{encode_condition, image_to_raw_pair, normalize_fit, resample_raw, GrayImage};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    // A 40-row chromosome: light background with three dark bands, the
    // right half slightly darker than the left.
    let (h, w) = (40, 6);
    let mut pixels = Vec::with_capacity(h * w);
    for y in 0..h {
        let dark = (8..14).contains(&y) || (20..23).contains(&y) || (30..36).contains(&y);
        for x in 0..w {
            let base: u8 = if dark { 60 } else { 210 };
            pixels.push(if x >= w / 2 { base - 20 } else { base });
        }
    }
    let image = GrayImage::new(h, w, pixels)?;

    let raw = image_to_raw_pair(&image)?;
    println!("raw length {}, left[8..12] = {:?}", raw.len(), &raw.left()[8..12]);

    // Sequences longer than d must be resampled before padding.
    let d = 32;
    let fitted = resample_raw(&raw, d)?;
    let seq = normalize_fit(&fitted, d)?;
    println!("valid_len {} of d = {}", seq.valid_len(), seq.d());
    let row: Vec<String> = seq.left().iter().map(|v| format!("{v:.2}")).collect();
    println!("left row: {}", row.join(" "));

    let cond = encode_condition(0, 550)?;
    println!("condition vector: {:?}", cond.concat());
    Ok(())
}
