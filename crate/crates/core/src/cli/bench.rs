//! Fusion scaling benchmark: forward FLOP counts and wall time for
//! independently encoded segments (fusion) against a reference encoder that
//! concatenates all segments before joint self-attention.

use std::fs;
use std::io::Write;
use std::path::PathBuf;
use std::time::Instant;

use clap::Args;
use image::{Rgb, RgbImage};

use crate::error::{Error, Result};
use crate::model::{
    load_checkpoint, ContextBundle, ModelConfig, SegmentKind, TokenSegment, UnityModel,
    FIRST_WORD_ID,
};

use super::{create_parent_dirs, require_file, CliConfig};

/// Swept segment totals (query plus contexts); at 1 the bundle is the bare
/// query and the two encoders coincide.
pub const BENCH_COUNTS: [usize; 5] = [1, 2, 4, 8, 13];

pub const BENCH_CSV_NAME: &str = "bench_fid.csv";
pub const BENCH_PLOT_NAME: &str = "bench_fid.png";
pub const BENCH_HEADER: &str = "segments,contexts,fid_flops,concat_flops,fid_wall_ns,concat_wall_ns";

#[derive(Debug, Args)]
pub struct BenchFidArgs {
    /// Forward passes per cell; wall time reports the minimum.
    #[arg(long, default_value_t = 3)]
    pub repeats: usize,

    /// Scaling CSV (default <out>/bench_fid.csv).
    #[arg(long)]
    pub csv: Option<PathBuf>,

    /// Plot image (default <out>/bench_fid.png).
    #[arg(long)]
    pub plot: Option<PathBuf>,
}

impl Default for BenchFidArgs {
    fn default() -> Self {
        BenchFidArgs { repeats: 3, csv: None, plot: None }
    }
}

/// One measured sweep cell.
#[derive(Debug, Clone, Copy)]
pub struct BenchRow {
    pub segments: usize,
    pub fid_flops: u64,
    pub concat_flops: u64,
    pub fid_wall_ns: u128,
    pub concat_wall_ns: u128,
}

fn bench_bundle(config: &ModelConfig, segments: usize) -> Result<ContextBundle> {
    let fill = |len: usize, salt: u32| -> Vec<u32> {
        (0..len)
            .map(|i| FIRST_WORD_ID + (salt * 31 + i as u32) % 64)
            .collect()
    };
    let query = TokenSegment::new(
        SegmentKind::Query,
        fill(config.max_len.query, 0),
        0,
        config,
    )?;
    let contexts = (1..segments)
        .map(|i| {
            TokenSegment::new(
                SegmentKind::WebTitle,
                fill(config.max_len.title, i as u32),
                i - 1,
                config,
            )
        })
        .collect::<Result<Vec<_>>>()?;
    ContextBundle::new(query, contexts)
}

/// Full forward through the concatenation baseline: joint encoding, then
/// the identical decoder and heads.
fn forward_concat(
    model: &UnityModel,
    tape: &mut crate::numerics::Tape,
    bundle: &ContextBundle,
) -> Result<()> {
    let mut valid = bundle.query.valid_mask();
    for ctx in &bundle.contexts {
        valid.extend(ctx.valid_mask());
    }
    let h = model.encode_concat(tape, bundle)?;
    let g = model.decode(tape, &bundle.query, h, &valid, false)?;
    model.dense_embed(tape, g)?;
    model.token_logits(tape, g)?;
    Ok(())
}

/// Measure both encoders over the sweep with a given model.
pub fn measure_scaling(model: &UnityModel, repeats: usize) -> Result<Vec<BenchRow>> {
    let repeats = repeats.max(1);
    let mut rows = Vec::with_capacity(BENCH_COUNTS.len());
    for &segments in &BENCH_COUNTS {
        let bundle = bench_bundle(&model.config, segments)?;
        let mut fid_flops = 0;
        let mut fid_wall = u128::MAX;
        for _ in 0..repeats {
            let mut tape = model.tape();
            let t = Instant::now();
            model.forward(&mut tape, &bundle)?;
            fid_wall = fid_wall.min(t.elapsed().as_nanos());
            fid_flops = tape.flops();
        }
        let mut concat_flops = 0;
        let mut concat_wall = u128::MAX;
        for _ in 0..repeats {
            let mut tape = model.tape();
            let t = Instant::now();
            forward_concat(model, &mut tape, &bundle)?;
            concat_wall = concat_wall.min(t.elapsed().as_nanos());
            concat_flops = tape.flops();
        }
        rows.push(BenchRow {
            segments,
            fid_flops,
            concat_flops,
            fid_wall_ns: fid_wall,
            concat_wall_ns: concat_wall,
        });
    }
    Ok(rows)
}

pub fn bench_csv(rows: &[BenchRow]) -> String {
    let mut out = String::from(BENCH_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.segments,
            r.segments - 1,
            r.fid_flops,
            r.concat_flops,
            r.fid_wall_ns,
            r.concat_wall_ns
        ));
    }
    out
}

/// Sweep, write CSV and plot, and print the scaling fits.
pub fn cmd_bench_fid(
    config: &CliConfig,
    args: &BenchFidArgs,
    out: &mut impl Write,
) -> Result<()> {
    require_file(&config.paths.checkpoint, "run train first")?;
    let model = load_checkpoint(&config.paths.checkpoint, None)?;
    let rows = measure_scaling(&model, args.repeats)?;

    let out_dir = config
        .paths
        .checkpoint
        .parent()
        .map(std::path::Path::to_path_buf)
        .unwrap_or_default();
    let csv_path = args.csv.clone().unwrap_or_else(|| out_dir.join(BENCH_CSV_NAME));
    let plot_path = args.plot.clone().unwrap_or_else(|| out_dir.join(BENCH_PLOT_NAME));
    create_parent_dirs(&[&csv_path, &plot_path])?;
    fs::write(&csv_path, bench_csv(&rows))?;
    render_plot(&rows, &plot_path)?;

    let xs: Vec<f64> = rows.iter().map(|r| r.segments as f64).collect();
    let fid: Vec<f64> = rows.iter().map(|r| r.fid_flops as f64).collect();
    let concat: Vec<f64> = rows.iter().map(|r| r.concat_flops as f64).collect();
    let fid_line = polyfit(&xs, &fid, 1)?;
    let fid_resid = max_rel_residual(&xs, &fid, &fid_line);
    let aic_lin = aic(&xs, &concat, &polyfit(&xs, &concat, 1)?);
    let aic_quad = aic(&xs, &concat, &polyfit(&xs, &concat, 2)?);

    write!(out, "{}", bench_csv(&rows))?;
    writeln!(
        out,
        "fusion flops linear fit: {:.0} + {:.0} per segment, max residual {:.3}%",
        fid_line[0],
        fid_line[1],
        100.0 * fid_resid
    )?;
    writeln!(
        out,
        "concat flops AIC: linear {:.1}, quadratic {:.1} ({} preferred)",
        aic_lin,
        aic_quad,
        if aic_quad < aic_lin { "quadratic" } else { "linear" }
    )?;
    writeln!(out, "wrote {}", csv_path.display())?;
    writeln!(out, "wrote {}", plot_path.display())?;
    Ok(())
}

/// Least-squares polynomial fit via the normal equations; returns
/// coefficients lowest power first.
pub fn polyfit(xs: &[f64], ys: &[f64], degree: usize) -> Result<Vec<f64>> {
    if xs.len() != ys.len() {
        return Err(Error::Contract(format!(
            "polyfit length mismatch: {} xs vs {} ys",
            xs.len(),
            ys.len()
        )));
    }
    let p = degree + 1;
    if xs.len() < p {
        return Err(Error::Contract(format!(
            "polyfit needs at least {p} points for degree {degree}, got {}",
            xs.len()
        )));
    }
    // Normal equations A^T A c = A^T y with A the Vandermonde matrix.
    let mut ata = vec![vec![0.0f64; p]; p];
    let mut aty = vec![0.0f64; p];
    for (&x, &y) in xs.iter().zip(ys) {
        let mut powers = vec![1.0f64; p];
        for i in 1..p {
            powers[i] = powers[i - 1] * x;
        }
        for i in 0..p {
            aty[i] += powers[i] * y;
            for j in 0..p {
                ata[i][j] += powers[i] * powers[j];
            }
        }
    }
    // Gaussian elimination with partial pivoting (p <= 3 here).
    for col in 0..p {
        let pivot = (col..p)
            .max_by(|&a, &b| ata[a][col].abs().total_cmp(&ata[b][col].abs()))
            .expect("non-empty pivot range");
        if ata[pivot][col].abs() < 1e-12 {
            return Err(Error::Numeric("polyfit: singular normal equations".into()));
        }
        ata.swap(col, pivot);
        aty.swap(col, pivot);
        for row in (col + 1)..p {
            let f = ata[row][col] / ata[col][col];
            for j in col..p {
                ata[row][j] -= f * ata[col][j];
            }
            aty[row] -= f * aty[col];
        }
    }
    let mut coeffs = vec![0.0f64; p];
    for row in (0..p).rev() {
        let mut s = aty[row];
        for j in (row + 1)..p {
            s -= ata[row][j] * coeffs[j];
        }
        coeffs[row] = s / ata[row][row];
    }
    Ok(coeffs)
}

fn poly_eval(coeffs: &[f64], x: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c)
}

/// Largest relative deviation of the fit from the observations.
pub fn max_rel_residual(xs: &[f64], ys: &[f64], coeffs: &[f64]) -> f64 {
    xs.iter()
        .zip(ys)
        .map(|(&x, &y)| {
            let denom = y.abs().max(f64::MIN_POSITIVE);
            (poly_eval(coeffs, x) - y).abs() / denom
        })
        .fold(0.0, f64::max)
}

/// Akaike information criterion for a least-squares fit:
/// n ln(RSS/n) + 2 (p + 1), lower is better.
pub fn aic(xs: &[f64], ys: &[f64], coeffs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let rss: f64 = xs
        .iter()
        .zip(ys)
        .map(|(&x, &y)| {
            let r = poly_eval(coeffs, x) - y;
            r * r
        })
        .sum();
    n * (rss.max(f64::MIN_POSITIVE) / n).ln() + 2.0 * (coeffs.len() as f64 + 1.0)
}

const PLOT_W: u32 = 720;
const PLOT_H: u32 = 480;
const MARGIN: i64 = 48;
const FID_COLOR: Rgb<u8> = Rgb([40, 90, 200]);
const CONCAT_COLOR: Rgb<u8> = Rgb([200, 60, 50]);

fn draw_line(img: &mut RgbImage, a: (i64, i64), b: (i64, i64), color: Rgb<u8>) {
    let (mut x0, mut y0) = a;
    let (x1, y1) = b;
    let dx = (x1 - x0).abs();
    let dy = -(y1 - y0).abs();
    let sx = if x0 < x1 { 1 } else { -1 };
    let sy = if y0 < y1 { 1 } else { -1 };
    let mut err = dx + dy;
    loop {
        if (0..PLOT_W as i64).contains(&x0) && (0..PLOT_H as i64).contains(&y0) {
            img.put_pixel(x0 as u32, y0 as u32, color);
        }
        if x0 == x1 && y0 == y1 {
            break;
        }
        let e2 = 2 * err;
        if e2 >= dy {
            err += dy;
            x0 += sx;
        }
        if e2 <= dx {
            err += dx;
            y0 += sy;
        }
    }
}

fn draw_marker(img: &mut RgbImage, (cx, cy): (i64, i64), color: Rgb<u8>) {
    for dx in -2..=2 {
        for dy in -2..=2 {
            let (x, y) = (cx + dx, cy + dy);
            if (0..PLOT_W as i64).contains(&x) && (0..PLOT_H as i64).contains(&y) {
                img.put_pixel(x as u32, y as u32, color);
            }
        }
    }
}

/// FLOPs-vs-segments line chart: fusion in blue, concatenation in red,
/// swept counts as vertical gridlines.
pub fn render_plot(rows: &[BenchRow], path: &std::path::Path) -> Result<()> {
    let mut img = RgbImage::from_pixel(PLOT_W, PLOT_H, Rgb([255, 255, 255]));
    let x_max = rows.iter().map(|r| r.segments).max().unwrap_or(1) as f64;
    let y_max = rows
        .iter()
        .map(|r| r.fid_flops.max(r.concat_flops))
        .max()
        .unwrap_or(1) as f64;
    let to_px = |seg: f64, flops: f64| -> (i64, i64) {
        let w = PLOT_W as i64 - 2 * MARGIN;
        let h = PLOT_H as i64 - 2 * MARGIN;
        let x = MARGIN + ((seg / x_max) * w as f64).round() as i64;
        let y = PLOT_H as i64 - MARGIN - ((flops / y_max) * h as f64).round() as i64;
        (x, y)
    };

    for r in rows {
        let (x, _) = to_px(r.segments as f64, 0.0);
        draw_line(&mut img, (x, MARGIN), (x, PLOT_H as i64 - MARGIN), Rgb([225, 225, 225]));
    }
    // Axes.
    let origin = (MARGIN, PLOT_H as i64 - MARGIN);
    draw_line(&mut img, origin, (PLOT_W as i64 - MARGIN, PLOT_H as i64 - MARGIN), Rgb([0, 0, 0]));
    draw_line(&mut img, origin, (MARGIN, MARGIN), Rgb([0, 0, 0]));

    for (color, series) in [
        (FID_COLOR, rows.iter().map(|r| r.fid_flops).collect::<Vec<_>>()),
        (CONCAT_COLOR, rows.iter().map(|r| r.concat_flops).collect::<Vec<_>>()),
    ] {
        let pts: Vec<(i64, i64)> = rows
            .iter()
            .zip(&series)
            .map(|(r, &f)| to_px(r.segments as f64, f as f64))
            .collect();
        for pair in pts.windows(2) {
            draw_line(&mut img, pair[0], pair[1], color);
        }
        for &p in &pts {
            draw_marker(&mut img, p, color);
        }
    }
    // Legend swatches, top-left: fusion above concatenation.
    draw_marker(&mut img, (MARGIN + 12, MARGIN + 12), FID_COLOR);
    draw_marker(&mut img, (MARGIN + 12, MARGIN + 28), CONCAT_COLOR);

    img.save(path).map_err(|e| Error::Format {
        path: path.display().to_string(),
        reason: e.to_string(),
    })
}
