//! Bar-chart data for density matrices, with CSV and SVG rendering.
//!
//! Rendering is deterministic: the same data always gives the same bytes.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::CMat;
use crate::qudit::DensityMatrix;
use crate::spin::{to_khz, PulseSequence};

/// Values below this magnitude draw no bar.
const BAR_CUTOFF: f64 = 1e-9;

/// Real and imaginary d×d grids of a matrix plus basis labels.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BarFigure {
    pub re: Vec<Vec<f64>>,
    pub im: Vec<Vec<f64>>,
    pub labels: Vec<String>,
}

pub fn bar_representation(rho: &DensityMatrix) -> BarFigure {
    BarFigure::from_matrix(rho.matrix())
}

impl BarFigure {
    pub fn from_matrix(m: &CMat) -> Self {
        let d = m.nrows();
        let grid = |f: fn(&crate::linalg::C64) -> f64| (0..d).map(|r| (0..d).map(|c| f(&m[(r, c)])).collect()).collect();
        Self { re: grid(|z| z.re), im: grid(|z| z.im), labels: (1..=d).map(|k| format!("|{k}>")).collect() }
    }

    pub fn dim(&self) -> usize {
        self.labels.len()
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.dim();
        let square = |g: &Vec<Vec<f64>>| g.len() == d && g.iter().all(|row| row.len() == d);
        if d == 0 || !square(&self.re) || !square(&self.im) {
            return Err(Error::InvalidParameter("figure grids must be square and match the labels".into()));
        }
        if self.re.iter().chain(&self.im).flatten().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("figure grids contain non-finite values".into()));
        }
        Ok(())
    }

    /// One row per matrix row, the real grid first, then the imaginary grid.
    /// Values use the shortest representation that parses back exactly.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("part,row");
        for l in &self.labels {
            let _ = write!(out, ",{l}");
        }
        out.push('\n');
        for (part, grid) in [("re", &self.re), ("im", &self.im)] {
            for (label, row) in self.labels.iter().zip(grid) {
                let _ = write!(out, "{part},{label}");
                for v in row {
                    let _ = write!(out, ",{v}");
                }
                out.push('\n');
            }
        }
        out
    }

    /// Two flat panels (real, imaginary). Each cell is shaded by its value
    /// and carries a bar whose height is the magnitude, full cell height at
    /// 1 (or at the largest magnitude when that exceeds 1).
    pub fn to_svg(&self, title: &str) -> String {
        let d = self.dim();
        let cell = 56.0;
        let margin = 48.0;
        let panel = cell * d as f64;
        let gap = 40.0;
        let width = 2.0 * panel + gap + 2.0 * margin;
        let height = panel + 2.0 * margin + 16.0;
        let scale = self.re.iter().chain(&self.im).flatten().fold(1.0_f64, |m, v| m.max(v.abs()));

        let mut s = String::new();
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0}" height="{height:.0}" viewBox="0 0 {width:.0} {height:.0}" font-family="sans-serif" font-size="11">"#
        );
        let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
        let _ = writeln!(s, r#"<text x="{margin}" y="20" font-size="14">{}</text>"#, escape(title));
        for (p, (name, grid)) in [("Re", &self.re), ("Im", &self.im)].into_iter().enumerate() {
            let x0 = margin + p as f64 * (panel + gap);
            let y0 = margin + 8.0;
            let _ = writeln!(s, r#"<g class="panel" id="{}">"#, name.to_lowercase());
            let _ = writeln!(s, r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{name}</text>"#, x0 + panel / 2.0, y0 - 14.0);
            for (r, row) in grid.iter().enumerate() {
                for (c, &v) in row.iter().enumerate() {
                    let x = x0 + c as f64 * cell;
                    let y = y0 + r as f64 * cell;
                    let t = (v.abs() / scale).min(1.0);
                    let _ = writeln!(
                        s,
                        r##"<rect class="cell" x="{x:.1}" y="{y:.1}" width="{cell:.1}" height="{cell:.1}" fill="{}" stroke="#bbbbbb"/>"##,
                        shade(v, t)
                    );
                    if v.abs() > BAR_CUTOFF {
                        let bw = cell * 0.4;
                        let bh = (cell - 6.0) * t;
                        let color = if v > 0.0 { "#1f5fa8" } else { "#b3312c" };
                        let _ = writeln!(
                            s,
                            r#"<rect class="bar" x="{:.1}" y="{:.1}" width="{bw:.1}" height="{bh:.1}" fill="{color}"><title>{name}({},{}) = {v:.6}</title></rect>"#,
                            x + (cell - bw) / 2.0,
                            y + cell - 3.0 - bh,
                            r + 1,
                            c + 1
                        );
                    }
                }
            }
            for (k, l) in self.labels.iter().enumerate() {
                let mid = k as f64 * cell + cell / 2.0;
                let _ = writeln!(s, r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#, x0 + mid, y0 + panel + 14.0, escape(l));
                let _ = writeln!(s, r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{}</text>"#, x0 - 4.0, y0 + mid + 4.0, escape(l));
            }
            s.push_str("</g>\n");
        }
        s.push_str("</svg>\n");
        s
    }
}

fn shade(v: f64, t: f64) -> String {
    // white at zero, toward blue for positive and red for negative values
    let fade = |full: f64| (255.0 - (255.0 - full) * t * 0.35).round() as u8;
    let (r, g, b) = if v >= 0.0 { (fade(31.0), fade(95.0), fade(168.0)) } else { (fade(179.0), fade(49.0), fade(44.0)) };
    format!("#{r:02x}{g:02x}{b:02x}")
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Amplitude of each block against time, labelled with its phase.
pub fn pulse_svg(seq: &PulseSequence, amp_max: f64, title: &str) -> String {
    let width = 640.0;
    let height = 220.0;
    let (left, right, top, bottom) = (56.0, 16.0, 32.0, 40.0);
    let plot_w = width - left - right;
    let plot_h = height - top - bottom;
    let total = seq.total_duration();
    let amp_max = seq.blocks().iter().fold(amp_max, |m, b| m.max(b.amplitude));

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0}" height="{height:.0}" viewBox="0 0 {width:.0} {height:.0}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{left}" y="20" font-size="14">{}</text>"#, escape(title));
    let mut t = 0.0;
    for (k, b) in seq.blocks().iter().enumerate() {
        let x = left + plot_w * t / total;
        let w = plot_w * b.duration / total;
        let h = if amp_max > 0.0 { plot_h * b.amplitude / amp_max } else { 0.0 };
        let hue = (b.phase.rem_euclid(2.0 * std::f64::consts::PI) / (2.0 * std::f64::consts::PI) * 360.0).round();
        let _ = writeln!(
            s,
            r##"<rect class="block" x="{x:.2}" y="{:.2}" width="{w:.2}" height="{h:.2}" fill="hsl({hue:.0},55%,55%)" stroke="#333333" stroke-width="0.5"><title>block {}: {:.3} kHz, {:.1} deg, {:.3} us</title></rect>"##,
            top + plot_h - h,
            k + 1,
            to_khz(b.amplitude),
            b.phase.to_degrees(),
            b.duration * 1e6
        );
        t += b.duration;
    }
    let _ = writeln!(
        s,
        r##"<line x1="{left}" y1="{:.1}" x2="{:.1}" y2="{:.1}" stroke="#000000"/>"##,
        top + plot_h,
        left + plot_w,
        top + plot_h
    );
    let _ = writeln!(s, r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">time (total {:.2} us)</text>"#, left + plot_w / 2.0, height - 10.0, total * 1e6);
    let _ = writeln!(s, r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{:.1} kHz</text>"#, left - 4.0, top + 4.0, to_khz(amp_max));
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{real, C64};
    use crate::qudit::{fourier_unitary, QuditState};
    use crate::spin::{khz, PulseBlock};

    #[test]
    fn basis_projector_has_one_unit_bar() {
        let rho = QuditState::basis(4, 2).unwrap().projector();
        let fig = bar_representation(&rho);
        for r in 0..4 {
            for c in 0..4 {
                assert_eq!(fig.re[r][c], if (r, c) == (1, 1) { 1.0 } else { 0.0 });
                assert_eq!(fig.im[r][c], 0.0);
            }
        }
        assert_eq!(fig.labels, ["|1>", "|2>", "|3>", "|4>"]);
        let svg = fig.to_svg("|2><2|");
        assert_eq!(svg.matches(r#"class="bar""#).count(), 1);
        assert!(svg.contains(r##"height="50.0" fill="#1f5fa8""##));
        assert!(svg.contains("|2&gt;&lt;2|"));
    }

    #[test]
    fn fourier_state_pattern() {
        let psi = fourier_unitary(4).unwrap().apply(&QuditState::basis(4, 2).unwrap()).unwrap();
        let fig = bar_representation(&psi.projector());
        // amplitudes (1, i, -1, -i)/2 give entries i^(r-c)/4
        let powers = [C64::new(1.0, 0.0), C64::new(0.0, 1.0), C64::new(-1.0, 0.0), C64::new(0.0, -1.0)];
        for r in 0..4 {
            for c in 0..4 {
                let expect = powers[(r + 4 - c) % 4] * real(0.25);
                assert!((fig.re[r][c] - expect.re).abs() < 1e-15);
                assert!((fig.im[r][c] - expect.im).abs() < 1e-15);
                assert!((fig.im[r][c] + fig.im[c][r]).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn mixed_state_is_flat_diagonal() {
        let fig = bar_representation(&DensityMatrix::maximally_mixed(4).unwrap());
        for r in 0..4 {
            for c in 0..4 {
                assert_eq!(fig.re[r][c], if r == c { 0.25 } else { 0.0 });
            }
        }
    }

    #[test]
    fn csv_round_trips_exactly() {
        let psi = fourier_unitary(4).unwrap().apply(&QuditState::basis(4, 3).unwrap()).unwrap();
        let fig = bar_representation(&psi.projector());
        let csv = fig.to_csv();
        let rows: Vec<Vec<&str>> = csv.lines().map(|l| l.split(',').collect()).collect();
        assert_eq!(rows[0], ["part", "row", "|1>", "|2>", "|3>", "|4>"]);
        assert_eq!(rows.len(), 9);
        for (k, row) in rows[1..].iter().enumerate() {
            let grid = if k < 4 { &fig.re } else { &fig.im };
            let parsed: Vec<f64> = row[2..].iter().map(|v| v.parse().unwrap()).collect();
            assert_eq!(parsed, grid[k % 4]);
        }
    }

    #[test]
    fn rendering_is_deterministic() {
        let fig = bar_representation(&DensityMatrix::maximally_mixed(4).unwrap());
        assert_eq!(fig.to_svg("x"), fig.to_svg("x"));
        let seq = PulseSequence::new(vec![
            PulseBlock::new(khz(20.0), 0.5, 10e-6).unwrap(),
            PulseBlock::new(khz(5.0), 4.0, 30e-6).unwrap(),
        ])
        .unwrap();
        let a = pulse_svg(&seq, khz(25.0), "UFT");
        assert_eq!(a, pulse_svg(&seq, khz(25.0), "UFT"));
        assert_eq!(a.matches(r#"class="block""#).count(), 2);
    }

    #[test]
    fn validate_rejects_ragged_grids() {
        let mut fig = bar_representation(&DensityMatrix::maximally_mixed(3).unwrap());
        assert!(fig.validate().is_ok());
        fig.im[1].pop();
        assert!(fig.validate().is_err());
    }
}
