//! Color swatches: rows of solid cells, typically reference, prediction, gold.

use std::fmt::Write as _;

use crate::colorspace::Rgb;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SwatchLayout {
    pub cell_width: usize,
    pub row_height: usize,
}

impl Default for SwatchLayout {
    fn default() -> Self {
        SwatchLayout {
            cell_width: 64,
            row_height: 32,
        }
    }
}

/// Parses rows separated by `;`, colors within a row separated by `,`.
/// Every row must have the same number of colors.
pub fn parse_rows(text: &str) -> Result<Vec<Vec<Rgb>>> {
    let rows = text
        .split(';')
        .map(str::trim)
        .filter(|r| !r.is_empty())
        .map(|row| row.split(',').map(str::parse).collect::<Result<Vec<Rgb>>>())
        .collect::<Result<Vec<_>>>()?;
    validate(&rows)?;
    Ok(rows)
}

fn validate(rows: &[Vec<Rgb>]) -> Result<usize> {
    let width = rows.first().map_or(0, Vec::len);
    if width == 0 {
        return Err(Error::input("swatch needs at least one color"));
    }
    if rows.iter().any(|r| r.len() != width) {
        return Err(Error::input("every swatch row needs the same number of colors"));
    }
    Ok(width)
}

/// Binary PPM (P6).
pub fn render_ppm(rows: &[Vec<Rgb>], layout: SwatchLayout) -> Result<Vec<u8>> {
    let cells = validate(rows)?;
    let width = cells * layout.cell_width;
    let height = rows.len() * layout.row_height;
    let mut out = format!("P6\n{width} {height}\n255\n").into_bytes();
    out.reserve(width * height * 3);
    for row in rows {
        let mut line = Vec::with_capacity(width * 3);
        for color in row {
            let px = color.to_bytes();
            for _ in 0..layout.cell_width {
                line.extend_from_slice(&px);
            }
        }
        for _ in 0..layout.row_height {
            out.extend_from_slice(&line);
        }
    }
    Ok(out)
}

pub fn render_svg(rows: &[Vec<Rgb>], layout: SwatchLayout) -> Result<String> {
    let cells = validate(rows)?;
    let (cw, rh) = (layout.cell_width, layout.row_height);
    let width = cells * cw;
    let height = rows.len() * rh;
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}">"#
    );
    for (y, row) in rows.iter().enumerate() {
        for (x, color) in row.iter().enumerate() {
            let _ = writeln!(
                svg,
                r#"  <rect x="{}" y="{}" width="{cw}" height="{rh}" fill="{}"/>"#,
                x * cw,
                y * rh,
                color.to_hex()
            );
        }
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}
