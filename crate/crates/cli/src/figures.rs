//! Built-in data for the published figures. Each curve is written with its
//! general envelope so any plotter can redraw the dashed bounds.

use clap::ValueEnum;
use fractal_spectra::carpets::{assouad_curve, carpet_dimensions, lower_curve, CarpetSpec};
use fractal_spectra::moran::{inverted_summary, mirror_curve, union_curves, union_summary, BasicConstruction};
use fractal_spectra::selfsimilar::{overlap_bound_curve, OverlapBoundParams};
use fractal_spectra::spectrum::{DimensionSummary, ThetaGrid};

use crate::output::{envelope_csv, Bundle};
use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Figure {
    /// Assouad and lower spectra of two Bedford-McMullen carpets.
    Fig3,
    /// Overlap bounds for self-similar sets without weak separation.
    Fig4,
    /// Unions of basic Moran constructions and their inversions.
    Fig6,
}

/// The two carpets: `m=2, n=3` with columns of 2 and 1 rectangles, and
/// `m=3, n=5` with columns of 4, 4 and 2. Only the column counts matter.
pub fn fig3_carpets() -> [(&'static str, CarpetSpec); 2] {
    [
        ("left", CarpetSpec::from_columns(2, 3, &[&[0, 2], &[1]]).expect("valid carpet")),
        (
            "right",
            CarpetSpec::from_columns(3, 5, &[&[0, 1, 3, 4], &[0, 2, 3, 4], &[1, 3]]).expect("valid carpet"),
        ),
    ]
}

/// `(s, t, upper_box)` for the two panels.
pub const FIG4_PANELS: [(&str, f64, f64, f64); 2] = [("left", 0.7, 0.5, 0.6), ("right", 0.3, 0.28, 0.3)];

/// Recipe parameters `(t, λ)` of each part; `None` is the runs construction.
pub type Fig6Panel = (&'static str, Vec<Option<(f64, f64)>>);

pub fn fig6_panels() -> [Fig6Panel; 3] {
    [
        ("1", vec![Some((1.0, 1.1)), Some((0.7, 1.2)), Some((0.5, 1.5)), Some((0.3, 4.0))]),
        ("2", vec![Some((0.5, 2.0)), None]),
        ("3", vec![Some((0.7, 2.0)), Some((0.9, 1.5)), None]),
    ]
}

pub fn emit(figure: Figure, grid: &ThetaGrid) -> Result<Bundle, CliError> {
    let mut bundle = Bundle::new();
    match figure {
        Figure::Fig3 => {
            for (panel, spec) in fig3_carpets() {
                let dims = carpet_dimensions(&spec);
                let up = assouad_curve(&spec, grid)?;
                let down = lower_curve(&spec, grid)?;
                bundle.add(format!("fig3_{panel}_assouad.csv"), envelope_csv(&up, &dims)?);
                bundle.add(format!("fig3_{panel}_lower.csv"), envelope_csv(&down, &dims)?);
            }
        }
        Figure::Fig4 => {
            for (panel, s, t, upper_box) in FIG4_PANELS {
                let params = OverlapBoundParams::new(s, t, upper_box)?;
                let curve = overlap_bound_curve(&params, grid)?;
                // Weak separation fails, so the Assouad dimension is 1.
                let dims = DimensionSummary::new(0.0, upper_box, upper_box, 1.0, 1)?;
                bundle.add(format!("fig4_{panel}.csv"), envelope_csv(&curve, &dims)?);
            }
        }
        Figure::Fig6 => {
            for (panel, parts) in fig6_panels() {
                let parts = parts
                    .into_iter()
                    .map(|p| match p {
                        Some((t, lambda)) => BasicConstruction::recipe(t, lambda),
                        None => Ok(BasicConstruction::Runs),
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                let dims = union_summary(&parts.iter().map(|p| p.summary()).collect::<Vec<_>>())?;
                let curves = parts.iter().map(|p| p.assouad_curve(grid)).collect::<Result<Vec<_>, _>>()?;
                let top = union_curves(&curves)?;
                let bottom = mirror_curve(&top)?;
                bundle.add(format!("fig6_{panel}_assouad.csv"), envelope_csv(&top, &dims)?);
                bundle.add(format!("fig6_{panel}_lower.csv"), envelope_csv(&bottom, &inverted_summary(&dims)?)?);
            }
        }
    }
    Ok(bundle)
}
