//! Small SVG plots: line plot, heat map, histogram.

use std::fmt::Write;

const W: f64 = 480.0;
const H: f64 = 360.0;
const PAD: f64 = 50.0;

fn header(title: &str, partial: bool) -> String {
    let mut s = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" viewBox=\"0 0 {W} {H}\" font-family=\"sans-serif\" font-size=\"11\">\n\
         <rect width=\"{W}\" height=\"{H}\" fill=\"white\"/>\n\
         <text x=\"{}\" y=\"20\" text-anchor=\"middle\" font-size=\"13\">{}</text>\n",
        W / 2.0,
        escape(title)
    );
    if partial {
        s.push_str("<text x=\"470\" y=\"20\" text-anchor=\"end\" fill=\"#b00\" font-weight=\"bold\">partial</text>\n");
    }
    s
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn range(vals: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = vals.filter(|v| v.is_finite()).fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if !lo.is_finite() {
        (0.0, 1.0)
    } else if hi - lo < 1e-300 {
        (lo - 0.5, hi + 0.5)
    } else {
        (lo, hi)
    }
}

fn axes(s: &mut String, x: (f64, f64), y: (f64, f64), xlabel: &str, ylabel: &str) {
    let (x0, y0, x1, y1) = (PAD, H - PAD, W - PAD / 2.0, PAD);
    let _ = writeln!(s, "<path d=\"M{x0} {y1} L{x0} {y0} L{x1} {y0}\" stroke=\"black\" fill=\"none\"/>");
    let _ = writeln!(s, "<text x=\"{x0}\" y=\"{}\" text-anchor=\"middle\">{:.3e}</text>", y0 + 14.0, x.0);
    let _ = writeln!(s, "<text x=\"{x1}\" y=\"{}\" text-anchor=\"middle\">{:.3e}</text>", y0 + 14.0, x.1);
    let _ = writeln!(s, "<text x=\"{}\" y=\"{}\" text-anchor=\"start\">{:.3e}</text>", 2.0, y0, y.0);
    let _ = writeln!(s, "<text x=\"{}\" y=\"{}\" text-anchor=\"start\">{:.3e}</text>", 2.0, y1 - 4.0, y.1);
    let _ = writeln!(s, "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{}</text>", (x0 + x1) / 2.0, H - 12.0, escape(xlabel));
    let _ = writeln!(
        s,
        "<text x=\"14\" y=\"{}\" text-anchor=\"middle\" transform=\"rotate(-90 14 {})\">{}</text>",
        H / 2.0,
        H / 2.0,
        escape(ylabel)
    );
}

fn sx(v: f64, r: (f64, f64)) -> f64 {
    PAD + (v - r.0) / (r.1 - r.0) * (W - 1.5 * PAD)
}

fn sy(v: f64, r: (f64, f64)) -> f64 {
    H - PAD - (v - r.0) / (r.1 - r.0) * (H - 2.0 * PAD)
}

/// One point per run; `None` values are drawn as gaps, partial points hollow.
pub fn line(title: &str, xlabel: &str, ylabel: &str, pts: &[(f64, Option<f64>, bool)]) -> String {
    let any_partial = pts.iter().any(|p| p.2 || p.1.is_none());
    let mut s = header(title, any_partial);
    let xr = range(pts.iter().map(|p| p.0));
    let yr = range(pts.iter().filter_map(|p| p.1));
    axes(&mut s, xr, yr, xlabel, ylabel);
    let mut d = String::new();
    let mut pen_up = true;
    for &(x, y, _) in pts {
        match y {
            Some(y) if y.is_finite() => {
                let _ = write!(d, "{}{:.2} {:.2} ", if pen_up { "M" } else { "L" }, sx(x, xr), sy(y, yr));
                pen_up = false;
            }
            _ => pen_up = true,
        }
    }
    let _ = writeln!(s, "<path d=\"{}\" stroke=\"#1f5fa8\" fill=\"none\"/>", d.trim_end());
    for &(x, y, partial) in pts {
        if let Some(y) = y.filter(|v| v.is_finite()) {
            let fill = if partial { "white" } else { "#1f5fa8" };
            let _ = writeln!(
                s,
                "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"4\" stroke=\"#1f5fa8\" fill=\"{fill}\"/>",
                sx(x, xr),
                sy(y, yr)
            );
        }
    }
    s.push_str("</svg>\n");
    s
}

/// Square matrix as a grey-scale grid with the values printed in each cell.
pub fn heat_map(title: &str, m: &[Vec<f64>], partial: bool) -> String {
    let mut s = header(title, partial);
    let n = m.len().max(1);
    let side = (H - 2.0 * PAD).min(W - 2.0 * PAD) / n as f64;
    let vmax = m.iter().flatten().filter(|v| v.is_finite()).fold(0.0f64, |a, v| a.max(v.abs())).max(1e-300);
    let x0 = (W - side * n as f64) / 2.0;
    for (i, row) in m.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            let t = if v.is_finite() { (v.abs() / vmax).clamp(0.0, 1.0) } else { 0.0 };
            let g = (255.0 * (1.0 - t)).round() as u8;
            let (x, y) = (x0 + j as f64 * side, PAD + i as f64 * side);
            let _ = writeln!(
                s,
                "<rect x=\"{x:.2}\" y=\"{y:.2}\" width=\"{side:.2}\" height=\"{side:.2}\" fill=\"rgb({g},{g},{g})\" stroke=\"#888\"/>"
            );
            let ink = if g < 128 { "white" } else { "black" };
            let _ = writeln!(
                s,
                "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"middle\" fill=\"{ink}\">{v:.3e}</text>",
                x + side / 2.0,
                y + side / 2.0 + 4.0
            );
        }
    }
    s.push_str("</svg>\n");
    s
}

pub fn histogram(title: &str, xlabel: &str, lo: f64, hi: f64, counts: &[usize], partial: bool) -> String {
    let mut s = header(title, partial);
    let xr = if hi > lo { (lo, hi) } else { (lo - 0.5, lo + 0.5) };
    let cmax = counts.iter().copied().max().unwrap_or(0).max(1) as f64;
    let yr = (0.0, cmax);
    axes(&mut s, xr, yr, xlabel, "count");
    let k = counts.len().max(1) as f64;
    for (b, c) in counts.iter().enumerate() {
        let a = xr.0 + (xr.1 - xr.0) * b as f64 / k;
        let z = xr.0 + (xr.1 - xr.0) * (b + 1) as f64 / k;
        let (x, w) = (sx(a, xr), sx(z, xr) - sx(a, xr));
        let y = sy(*c as f64, yr);
        let _ = writeln!(
            s,
            "<rect x=\"{x:.2}\" y=\"{y:.2}\" width=\"{w:.2}\" height=\"{:.2}\" fill=\"#7a9cc6\" stroke=\"white\"/>",
            H - PAD - y
        );
    }
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plots_are_well_formed() {
        let l = line("eps", "alpha", "eps", &[(0.8, Some(0.1), false), (0.9, None, true), (1.0, Some(0.05), false)]);
        assert!(l.starts_with("<svg") && l.ends_with("</svg>\n") && l.contains("partial"));
        assert_eq!(l.matches("<circle").count(), 2);
        let h = heat_map("gram", &[vec![1.0, 0.0], vec![0.0, 1.0]], false);
        assert_eq!(h.matches("<rect").count(), 5);
        assert!(!h.contains(">partial<"));
        let g = histogram("ratio", "x", 0.9, 1.1, &[1, 4, 2], true);
        assert!(g.contains(">partial<"));
    }
}
