//! Minimal static SVG emission: marginal histograms with prior overlays,
//! pairwise scatter panels, and credible-band curves. No external renderer;
//! the files are plain SVG 1.1 documents.

use std::fmt::Write as _;

const MARGIN: f64 = 42.0;

struct Panel {
    x0: f64,
    y0: f64,
    width: f64,
    height: f64,
    xlim: (f64, f64),
    ylim: (f64, f64),
}

impl Panel {
    fn x(&self, v: f64) -> f64 {
        let (lo, hi) = self.xlim;
        self.x0 + (v - lo) / (hi - lo) * self.width
    }

    fn y(&self, v: f64) -> f64 {
        let (lo, hi) = self.ylim;
        self.y0 + self.height - (v - lo) / (hi - lo) * self.height
    }
}

fn pad_limits(lo: f64, hi: f64) -> (f64, f64) {
    if lo == hi {
        (lo - 0.5, hi + 0.5)
    } else {
        let pad = 0.05 * (hi - lo);
        (lo - pad, hi + pad)
    }
}

fn bounds(values: &[f64]) -> (f64, f64) {
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    pad_limits(lo, hi)
}

fn document(width: f64, height: f64, body: &str) -> String {
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width}\" height=\"{height}\" \
         viewBox=\"0 0 {width} {height}\" font-family=\"monospace\" font-size=\"11\">\n\
         <rect width=\"{width}\" height=\"{height}\" fill=\"white\"/>\n{body}</svg>\n"
    )
}

fn axes(out: &mut String, p: &Panel, title: &str) {
    let _ = writeln!(
        out,
        "<rect x=\"{:.2}\" y=\"{:.2}\" width=\"{:.2}\" height=\"{:.2}\" fill=\"none\" stroke=\"#444\"/>",
        p.x0, p.y0, p.width, p.height
    );
    let _ = writeln!(
        out,
        "<text x=\"{:.2}\" y=\"{:.2}\">{}</text>",
        p.x0,
        p.y0 - 6.0,
        title
    );
    let _ = writeln!(
        out,
        "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"end\" font-size=\"9\">{:.3}</text>",
        p.x0 - 3.0,
        p.y0 + p.height,
        p.ylim.0
    );
    let _ = writeln!(
        out,
        "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"end\" font-size=\"9\">{:.3}</text>",
        p.x0 - 3.0,
        p.y0 + 9.0,
        p.ylim.1
    );
    let _ = writeln!(
        out,
        "<text x=\"{:.2}\" y=\"{:.2}\" font-size=\"9\">{:.3}</text>",
        p.x0,
        p.y0 + p.height + 12.0,
        p.xlim.0
    );
    let _ = writeln!(
        out,
        "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"end\" font-size=\"9\">{:.3}</text>",
        p.x0 + p.width,
        p.y0 + p.height + 12.0,
        p.xlim.1
    );
}

fn polyline(out: &mut String, p: &Panel, xs: &[f64], ys: &[f64], color: &str, width: f64) {
    let pts: Vec<String> = xs
        .iter()
        .zip(ys)
        .map(|(&x, &y)| format!("{:.2},{:.2}", p.x(x), p.y(y)))
        .collect();
    let _ = writeln!(
        out,
        "<polyline points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"{width}\"/>",
        pts.join(" ")
    );
}

/// Weighted histogram of one marginal with the prior density overlaid.
/// `prior_density` evaluates the prior marginal (natural scale) at a point.
pub fn marginal_histogram(
    name: &str,
    values: &[f64],
    weights: &[f64],
    prior_density: impl Fn(f64) -> f64,
) -> String {
    let (lo, hi) = bounds(values);
    let bins = 40usize;
    let bw = (hi - lo) / bins as f64;
    let mut mass = vec![0.0f64; bins];
    for (&v, &w) in values.iter().zip(weights) {
        let k = (((v - lo) / bw) as usize).min(bins - 1);
        mass[k] += w;
    }
    // both curves on a density scale so the overlay is comparable
    let density: Vec<f64> = mass.iter().map(|m| m / bw).collect();
    let centers: Vec<f64> = (0..bins).map(|k| lo + (k as f64 + 0.5) * bw).collect();
    let prior: Vec<f64> = centers.iter().map(|&c| prior_density(c)).collect();
    let top = density
        .iter()
        .chain(prior.iter())
        .copied()
        .fold(0.0f64, f64::max)
        .max(1e-12);

    let panel = Panel {
        x0: MARGIN,
        y0: MARGIN,
        width: 360.0,
        height: 220.0,
        xlim: (lo, hi),
        ylim: (0.0, 1.08 * top),
    };
    let mut body = String::new();
    for (k, &d) in density.iter().enumerate() {
        let x = panel.x(lo + k as f64 * bw);
        let x1 = panel.x(lo + (k + 1) as f64 * bw);
        let y = panel.y(d);
        let _ = writeln!(
            &mut body,
            "<rect x=\"{:.2}\" y=\"{:.2}\" width=\"{:.2}\" height=\"{:.2}\" fill=\"#7aa6d6\" stroke=\"none\"/>",
            x,
            y,
            x1 - x,
            panel.y(0.0) - y
        );
    }
    polyline(&mut body, &panel, &centers, &prior, "#c23b22", 1.5);
    axes(&mut body, &panel, &format!("posterior marginal: {name} (line = prior)"));
    document(panel.width + 2.0 * MARGIN, panel.height + 2.0 * MARGIN, &body)
}

/// Grid of pairwise scatter panels over all parameter components.
pub fn pairs_plot(names: &[String], columns: &[Vec<f64>]) -> String {
    let p = columns.len();
    let cell = 130.0;
    let gap = 48.0;
    let mut body = String::new();
    let mut panels = 0usize;
    for a in 0..p {
        for b in (a + 1)..p {
            let row = panels / 3;
            let col = panels % 3;
            panels += 1;
            let panel = Panel {
                x0: MARGIN + col as f64 * (cell + gap),
                y0: MARGIN + row as f64 * (cell + gap),
                width: cell,
                height: cell,
                xlim: bounds(&columns[a]),
                ylim: bounds(&columns[b]),
            };
            for (&x, &y) in columns[a].iter().zip(&columns[b]) {
                let _ = writeln!(
                    &mut body,
                    "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"1.2\" fill=\"#33557a\" fill-opacity=\"0.45\"/>",
                    panel.x(x),
                    panel.y(y)
                );
            }
            axes(&mut body, &panel, &format!("{} vs {}", names[a], names[b]));
        }
    }
    let rows = panels.div_ceil(3).max(1);
    let cols = panels.min(3).max(1);
    document(
        cols as f64 * (cell + gap) + 2.0 * MARGIN,
        rows as f64 * (cell + gap) + 2.0 * MARGIN,
        &body,
    )
}

/// Credible-band plot: shaded 5-95% band, median, and mean curves over a
/// common abscissa grid.
pub fn band_plot(
    title: &str,
    grid: &[f64],
    lower: &[f64],
    upper: &[f64],
    median: &[f64],
    mean: &[f64],
) -> String {
    let (xlo, xhi) = pad_limits(grid[0], grid[grid.len() - 1]);
    let ylo = lower.iter().copied().fold(f64::INFINITY, f64::min);
    let yhi = upper.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let (ylo, yhi) = pad_limits(ylo, yhi);
    let panel = Panel {
        x0: MARGIN,
        y0: MARGIN,
        width: 420.0,
        height: 240.0,
        xlim: (xlo, xhi),
        ylim: (ylo, yhi),
    };
    let mut body = String::new();
    let mut pts: Vec<String> = grid
        .iter()
        .zip(upper)
        .map(|(&x, &y)| format!("{:.2},{:.2}", panel.x(x), panel.y(y)))
        .collect();
    pts.extend(
        grid.iter()
            .zip(lower)
            .rev()
            .map(|(&x, &y)| format!("{:.2},{:.2}", panel.x(x), panel.y(y))),
    );
    let _ = writeln!(
        &mut body,
        "<polygon points=\"{}\" fill=\"#a9c6e8\" fill-opacity=\"0.6\" stroke=\"none\"/>",
        pts.join(" ")
    );
    polyline(&mut body, &panel, grid, median, "#1f4e79", 1.5);
    polyline(&mut body, &panel, grid, mean, "#c23b22", 1.2);
    axes(&mut body, &panel, title);
    document(panel.width + 2.0 * MARGIN, panel.height + 2.0 * MARGIN, &body)
}
