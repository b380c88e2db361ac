//! Image-quality and recovery metrics plus image export.
//!
//! Every image is a row-major magnitude vector (`index = iy * nx + ix`).
//! Exported files list grid rows in ascending `iy`.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{check_len, Error, Result};
use crate::model::SceneGrid;

/// Saturation window and quantization depth for the dB gray-level mapping.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EntropyConfig {
    pub dynamic_range_db: f64,
    pub gray_levels: usize,
}

impl Default for EntropyConfig {
    fn default() -> Self {
        Self {
            dynamic_range_db: 50.0,
            gray_levels: 256,
        }
    }
}

impl EntropyConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dynamic_range_db.is_finite() && self.dynamic_range_db > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "dynamic_range_db must be positive, got {}",
                self.dynamic_range_db
            )));
        }
        if self.gray_levels < 2 {
            return Err(Error::InvalidConfig(format!(
                "gray_levels must be at least 2, got {}",
                self.gray_levels
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ImageFormat {
    /// Binary 8-bit P5 graymap using the [`gray_levels`] mapping.
    Pgm,
    /// Raw values, one line per grid row, `{:.16e}` formatting.
    Csv,
}

fn check_image(image: &[f64]) -> Result<f64> {
    let mut peak = 0.0_f64;
    for (index, &value) in image.iter().enumerate() {
        if !value.is_finite() {
            return Err(Error::NonFinite("image pixel"));
        }
        if value < 0.0 {
            return Err(Error::NegativePixel { index, value });
        }
        peak = peak.max(value);
    }
    Ok(peak)
}

/// Fraction of pixels strictly above `rel_threshold * max(image)`; zero for
/// an all-zero image.
pub fn normalized_sparsity(image: &[f64], rel_threshold: f64) -> f64 {
    let peak = image.iter().copied().fold(0.0_f64, f64::max);
    if image.is_empty() || peak <= 0.0 {
        return 0.0;
    }
    let cut = rel_threshold * peak;
    image.iter().filter(|&&v| v > cut).count() as f64 / image.len() as f64
}

/// Peak-relative dB quantization shared by entropy and PGM export.
///
/// `dB = 20 log10(v / max)`, clamped to `[-D, 0]`, then
/// `g = floor((dB + D) / D * (L - 1))`. The peak maps to `L - 1`, anything at
/// or below `-D` dB (including zeros) to 0. An all-zero image maps to all 0.
pub fn gray_levels(image: &[f64], cfg: &EntropyConfig) -> Result<Vec<usize>> {
    cfg.validate()?;
    let peak = check_image(image)?;
    if peak == 0.0 {
        return Ok(vec![0; image.len()]);
    }
    let d = cfg.dynamic_range_db;
    let top = (cfg.gray_levels - 1) as f64;
    Ok(image
        .iter()
        .map(|&v| {
            let db = (20.0 * (v / peak).log10()).max(-d).min(0.0);
            (((db + d) / d * top).floor() as usize).min(cfg.gray_levels - 1)
        })
        .collect())
}

/// Shannon entropy in bits of the gray-level histogram of [`gray_levels`].
pub fn image_entropy(image: &[f64], cfg: &EntropyConfig) -> Result<f64> {
    let levels = gray_levels(image, cfg)?;
    if levels.is_empty() {
        return Ok(0.0);
    }
    let mut hist = vec![0usize; cfg.gray_levels];
    for g in levels {
        hist[g] += 1;
    }
    let total = image.len() as f64;
    let h: f64 = hist
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / total;
            -p * p.log2()
        })
        .sum();
    Ok(h.max(0.0))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SupportScore {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub detections: usize,
    pub matched: usize,
}

fn chebyshev(grid: &SceneGrid, a: usize, b: usize) -> usize {
    let (ax, ay) = grid.position(a);
    let (bx, by) = grid.position(b);
    ax.abs_diff(bx).max(ay.abs_diff(by))
}

/// Pixels above `rel_threshold * max` that survive non-maximum suppression
/// within a Chebyshev window of `radius` pixels. Of two equal neighbors the
/// lower index survives. Sorted by descending value, then ascending index.
pub fn detect_peaks(
    image: &[f64],
    grid: &SceneGrid,
    rel_threshold: f64,
    radius: usize,
) -> Result<Vec<usize>> {
    check_len("image", grid.len(), image.len())?;
    let peak = check_image(image)?;
    if peak == 0.0 {
        return Ok(Vec::new());
    }
    let cut = rel_threshold * peak;
    let r = radius as isize;
    let mut found: Vec<usize> = (0..image.len())
        .filter(|&i| image[i] > cut)
        .filter(|&i| {
            let (ix, iy) = grid.position(i);
            let v = image[i];
            for dy in -r..=r {
                for dx in -r..=r {
                    let (jx, jy) = (ix as isize + dx, iy as isize + dy);
                    if (dx, dy) == (0, 0)
                        || jx < 0
                        || jy < 0
                        || jx >= grid.nx as isize
                        || jy >= grid.ny as isize
                    {
                        continue;
                    }
                    let j = grid.index(jx as usize, jy as usize);
                    if image[j] > v || (image[j] == v && j < i) {
                        return false;
                    }
                }
            }
            true
        })
        .collect();
    found.sort_by(|&a, &b| image[b].total_cmp(&image[a]).then(a.cmp(&b)));
    Ok(found)
}

/// Support-recovery precision, recall and F1.
///
/// Detections come from [`detect_peaks`]; each, strongest first, is matched
/// to the nearest still-unmatched truth pixel within `match_radius_px`
/// (Chebyshev distance, ties to the lower index). Precision is 0 when
/// nothing is detected; F1 is 0 when precision + recall is 0.
pub fn support_f1(
    reconstruction: &[f64],
    grid: &SceneGrid,
    truth_support: &[usize],
    rel_threshold: f64,
    match_radius_px: usize,
) -> Result<SupportScore> {
    if truth_support.is_empty() {
        return Err(Error::Empty("truth support"));
    }
    if let Some(&bad) = truth_support.iter().find(|&&t| t >= grid.len()) {
        return Err(Error::InvalidConfig(format!(
            "truth pixel {bad} outside a grid of {} pixels",
            grid.len()
        )));
    }
    let mut truth = truth_support.to_vec();
    truth.sort_unstable();
    truth.dedup();

    let detections = detect_peaks(reconstruction, grid, rel_threshold, match_radius_px)?;
    let mut used = vec![false; truth.len()];
    let mut matched = 0;
    for &d in &detections {
        let best = truth
            .iter()
            .enumerate()
            .filter(|&(k, _)| !used[k])
            .map(|(k, &t)| (chebyshev(grid, d, t), k))
            .filter(|&(dist, _)| dist <= match_radius_px)
            .min();
        if let Some((_, k)) = best {
            used[k] = true;
            matched += 1;
        }
    }
    let precision = if detections.is_empty() {
        0.0
    } else {
        matched as f64 / detections.len() as f64
    };
    let recall = matched as f64 / truth.len() as f64;
    let f1 = if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    };
    Ok(SupportScore {
        precision,
        recall,
        f1,
        detections: detections.len(),
        matched,
    })
}

/// P5 bytes of `image` on an `nx x ny` grid using [`gray_levels`]; maxval is
/// `gray_levels - 1`, which must fit in one byte.
pub fn encode_pgm(image: &[f64], nx: usize, ny: usize, cfg: &EntropyConfig) -> Result<Vec<u8>> {
    check_len("image", nx * ny, image.len())?;
    if cfg.gray_levels > 256 {
        return Err(Error::InvalidConfig(format!(
            "8-bit PGM supports at most 256 gray levels, got {}",
            cfg.gray_levels
        )));
    }
    let levels = gray_levels(image, cfg)?;
    let mut out = format!("P5\n{nx} {ny}\n{}\n", cfg.gray_levels - 1).into_bytes();
    out.extend(levels.into_iter().map(|g| g as u8));
    Ok(out)
}

/// Comma-separated rows of `{:.16e}` values, one per grid row.
pub fn encode_csv(image: &[f64], nx: usize, ny: usize) -> Result<String> {
    check_len("image", nx * ny, image.len())?;
    let mut out = String::with_capacity(image.len() * 24);
    for row in image.chunks_exact(nx.max(1)) {
        for (i, v) in row.iter().enumerate() {
            if i > 0 {
                out.push(',');
            }
            let _ = write!(out, "{v:.16e}");
        }
        out.push('\n');
    }
    Ok(out)
}

/// Writes `image` to `path` in `format`.
pub fn export_image(
    image: &[f64],
    grid: &SceneGrid,
    path: &Path,
    format: ImageFormat,
    cfg: &EntropyConfig,
) -> Result<()> {
    let bytes = match format {
        ImageFormat::Pgm => encode_pgm(image, grid.nx, grid.ny, cfg)?,
        ImageFormat::Csv => encode_csv(image, grid.nx, grid.ny)?.into_bytes(),
    };
    fs::write(path, bytes).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Parses CSV written by [`encode_csv`]; returns the row-major values and
/// `(nx, ny)`.
pub fn parse_image_csv(text: &str) -> std::result::Result<(Vec<f64>, usize, usize), String> {
    let mut values = Vec::new();
    let mut nx = None;
    let mut ny = 0;
    for (line_no, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let row: Vec<f64> = line
            .split(',')
            .map(|f| f.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| format!("line {}: {e}", line_no + 1))?;
        match nx {
            None => nx = Some(row.len()),
            Some(w) if w != row.len() => {
                return Err(format!(
                    "line {}: expected {w} values, found {}",
                    line_no + 1,
                    row.len()
                ))
            }
            _ => {}
        }
        values.extend(row);
        ny += 1;
    }
    let nx = nx.ok_or_else(|| "no image rows".to_string())?;
    Ok((values, nx, ny))
}

/// Reads an image CSV from disk; see [`parse_image_csv`].
pub fn read_image_csv(path: &Path) -> Result<(Vec<f64>, usize, usize)> {
    let text = fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_image_csv(&text).map_err(|message| Error::Parse {
        path: path.to_path_buf(),
        message,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(d: f64) -> EntropyConfig {
        EntropyConfig {
            dynamic_range_db: d,
            gray_levels: 256,
        }
    }

    #[test]
    fn sparsity_conventions() {
        assert_eq!(normalized_sparsity(&[0.0; 5], 0.1), 0.0);
        assert_eq!(normalized_sparsity(&[2.0; 5], 0.0), 1.0);
        let img = [0.0, 0.05, 0.5, 1.0];
        assert_eq!(normalized_sparsity(&img, 0.0), 0.75);
        assert_eq!(normalized_sparsity(&img, 0.1), 0.5);
        assert_eq!(normalized_sparsity(&img, 0.5), 0.25);
    }

    #[test]
    fn entropy_hand_cases() {
        assert_eq!(image_entropy(&[3.0; 16], &cfg(40.0)).unwrap(), 0.0);
        assert_eq!(image_entropy(&[0.0; 16], &cfg(40.0)).unwrap(), 0.0);
        let half = [1.0, 1.0, 0.0, 1e-3, 1.0, 1e-2, 1.0, 0.0];
        assert!((image_entropy(&half, &cfg(40.0)).unwrap() - 1.0).abs() < 1e-15);
        let quarters = [1.0, 0.1, 0.01, 0.0];
        assert!((image_entropy(&quarters, &cfg(60.0)).unwrap() - 2.0).abs() < 1e-15);
    }

    #[test]
    fn gray_level_mapping_by_hand() {
        // 0.1 of peak is -20 dB: (40 - 20) / 40 * 255 = 127.5 -> 127.
        let g = gray_levels(&[0.0, 1.0, 0.1, 0.0], &cfg(40.0)).unwrap();
        assert_eq!(g, vec![0, 255, 127, 0]);
        let pgm = encode_pgm(&[0.0, 1.0, 0.1, 0.0], 2, 2, &cfg(40.0)).unwrap();
        let mut expect = b"P5\n2 2\n255\n".to_vec();
        expect.extend([0u8, 255, 127, 0]);
        assert_eq!(pgm, expect);
        let zero = encode_pgm(&[0.0; 4], 2, 2, &cfg(40.0)).unwrap();
        assert!(zero[zero.len() - 4..].iter().all(|&b| b == 0));
    }

    #[test]
    fn negative_and_non_finite_pixels_are_rejected() {
        assert!(matches!(
            image_entropy(&[1.0, -0.5], &cfg(40.0)),
            Err(Error::NegativePixel { index: 1, .. })
        ));
        assert!(image_entropy(&[1.0, f64::NAN], &cfg(40.0)).is_err());
        assert!(image_entropy(&[1.0], &EntropyConfig { gray_levels: 1, ..cfg(40.0) }).is_err());
        assert!(encode_pgm(&[1.0], 1, 1, &EntropyConfig { gray_levels: 1024, ..cfg(40.0) }).is_err());
    }

    #[test]
    fn csv_round_trip_is_lossless() {
        let img = [0.0, 1.0 / 3.0, 1e-300, 12345.678901234567, f64::MIN_POSITIVE, 2.0];
        let text = encode_csv(&img, 3, 2).unwrap();
        assert_eq!(text.lines().count(), 2);
        let (back, nx, ny) = parse_image_csv(&text).unwrap();
        assert_eq!((nx, ny), (3, 2));
        assert_eq!(back, img);
        assert!(parse_image_csv("1,2\n3\n").is_err());
        assert!(parse_image_csv("").is_err());
    }

    #[test]
    fn peaks_are_suppressed_within_radius() {
        let grid = SceneGrid::new(5, 1, 5.0, 1.0).unwrap();
        let img = [0.9, 1.0, 0.0, 0.5, 0.5];
        assert_eq!(detect_peaks(&img, &grid, 0.1, 1).unwrap(), vec![1, 3]);
        assert_eq!(detect_peaks(&img, &grid, 0.1, 0).unwrap(), vec![1, 0, 3, 4]);
        assert_eq!(detect_peaks(&img, &grid, 0.6, 1).unwrap(), vec![1]);
    }

    #[test]
    fn f1_conventions() {
        let grid = SceneGrid::new(4, 4, 4.0, 4.0).unwrap();
        let truth = [0, 5, 15];
        let mut indicator = vec![0.0; 16];
        for &t in &truth {
            indicator[t] = 1.0;
        }
        let s = support_f1(&indicator, &grid, &truth, 0.1, 0).unwrap();
        assert_eq!((s.precision, s.recall, s.f1), (1.0, 1.0, 1.0));
        let z = support_f1(&[0.0; 16], &grid, &truth, 0.1, 1).unwrap();
        assert_eq!((z.precision, z.recall, z.f1), (0.0, 0.0, 0.0));
        assert!(support_f1(&indicator, &grid, &[], 0.1, 1).is_err());
        assert!(support_f1(&indicator, &grid, &[16], 0.1, 1).is_err());
    }

    #[test]
    fn one_detection_cannot_claim_two_truths() {
        let grid = SceneGrid::new(4, 1, 4.0, 1.0).unwrap();
        let img = [0.0, 1.0, 0.0, 0.0];
        let s = support_f1(&img, &grid, &[0, 2], 0.1, 1).unwrap();
        assert_eq!((s.detections, s.matched), (1, 1));
        assert_eq!(s.precision, 1.0);
        assert_eq!(s.recall, 0.5);
    }
}
