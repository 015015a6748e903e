//! Maps resolved table operations onto raster specs.

use super::PipelineError;
use crate::model::ParamValue;
use crate::raster::{
    AntiAlias, BlendMode, Channel, ColorSpec, CurveKind, EffectSpec, ExtractMethod, FilterSpec, HealMode, LensSpec,
    NoiseDistribution, Quality, RadialMethod, RemovalSpec, SmartMode, StrokePosition, TextStyle,
};
use crate::sampler::ResolvedOp;

/// A concealment step in raster terms.
#[derive(Clone, Debug, PartialEq)]
pub enum PostSpec {
    Filter(FilterSpec),
    Color(ColorSpec),
    Effect(EffectSpec),
}

fn bad(op: &ResolvedOp, what: &str) -> PipelineError {
    PipelineError::BadParam(format!("{} {}: {what}", op.op_id, op.variant))
}

fn num(op: &ResolvedOp, name: &str) -> Result<f64, PipelineError> {
    op.param(name).and_then(ParamValue::as_f64).ok_or_else(|| bad(op, &format!("`{name}` missing or not numeric")))
}

fn num_or(op: &ResolvedOp, name: &str, default: f64) -> Result<f64, PipelineError> {
    match op.param(name) {
        None => Ok(default),
        Some(_) => num(op, name),
    }
}

fn text<'a>(op: &'a ResolvedOp, name: &str) -> Result<&'a str, PipelineError> {
    op.param(name).and_then(ParamValue::as_str).ok_or_else(|| bad(op, &format!("`{name}` missing or not text")))
}

pub(crate) fn color(op: &ResolvedOp, name: &str) -> Result<[u8; 3], PipelineError> {
    match op.param(name) {
        Some(ParamValue::Color(c)) => Ok(*c),
        Some(ParamValue::Ints(v)) if v.len() == 3 && v.iter().all(|c| (0..=255).contains(c)) => {
            Ok([v[0] as u8, v[1] as u8, v[2] as u8])
        }
        _ => Err(bad(op, &format!("`{name}` missing or not a colour"))),
    }
}

fn ints<'a>(op: &'a ResolvedOp, name: &str, n: usize) -> Result<&'a [i64], PipelineError> {
    op.param(name)
        .and_then(ParamValue::as_ints)
        .filter(|v| v.len() == n)
        .ok_or_else(|| bad(op, &format!("`{name}` must hold {n} integers")))
}

fn yes(op: &ResolvedOp, name: &str) -> Result<bool, PipelineError> {
    match text(op, name)? {
        "yes" => Ok(true),
        "no" => Ok(false),
        other => Err(bad(op, &format!("`{name}` = `{other}` is not yes/no"))),
    }
}

fn blend(op: &ResolvedOp) -> Result<BlendMode, PipelineError> {
    let s = text(op, "blend_mode")?;
    BlendMode::parse(s).ok_or_else(|| bad(op, &format!("unknown blend mode `{s}`")))
}

fn distribution(op: &ResolvedOp) -> Result<NoiseDistribution, PipelineError> {
    match text(op, "distribution")? {
        "gaussian" => Ok(NoiseDistribution::Gaussian),
        "uniform" => Ok(NoiseDistribution::Uniform),
        other => Err(bad(op, &format!("unknown distribution `{other}`"))),
    }
}

fn quality(op: &ResolvedOp) -> Result<Quality, PipelineError> {
    match text(op, "quality")? {
        "best" | "high" => Ok(Quality::High),
        "good" | "medium" => Ok(Quality::Medium),
        "draft" | "low" => Ok(Quality::Low),
        other => Err(bad(op, &format!("unknown quality `{other}`"))),
    }
}

fn blades(op: &ResolvedOp) -> Result<u32, PipelineError> {
    Ok(match text(op, "aperture_shape")? {
        "triangle" => 3,
        "quadrilateral" => 4,
        "pentagon" => 5,
        "hexagon" => 6,
        "heptagon" => 7,
        "octagon" => 8,
        other => return Err(bad(op, &format!("unknown aperture `{other}`"))),
    })
}

/// Raster spec for a post-processing variant, or `None` if the variant
/// is not a concealment step.
pub fn post_spec(op: &ResolvedOp) -> Result<Option<PostSpec>, PipelineError> {
    use PostSpec::{Color, Effect, Filter};
    let spec = match op.variant.as_str() {
        "sharpen" => {
            // Two parameterizations: amount/radius/threshold, or
            // iterations/strength/radius/threshold.
            let amount = match op.param("amount") {
                Some(_) => num(op, "amount")?,
                None => num(op, "strength")?,
            };
            Filter(FilterSpec::Sharpen {
                amount,
                radius: num(op, "radius")?,
                threshold: num(op, "threshold")?,
                iterations: num_or(op, "iterations", 1.0)? as u32,
            })
        }
        "blur" => Filter(FilterSpec::Blur),
        "blur-more" => Filter(FilterSpec::BlurMore),
        "mean-filter" => Filter(FilterSpec::Mean),
        "gaussian-blur" => Filter(FilterSpec::Gaussian { radius: num(op, "radius")? }),
        "motion-blur" => Filter(FilterSpec::Motion { angle: num(op, "angle")?, distance: num(op, "distance")? }),
        "radial-blur" => Filter(FilterSpec::Radial {
            method: match text(op, "method")? {
                "spin" => RadialMethod::Spin,
                "zoom" => RadialMethod::Zoom,
                other => return Err(bad(op, &format!("unknown method `{other}`"))),
            },
            quality: quality(op)?,
        }),
        "smart-blur" => Filter(FilterSpec::Smart {
            radius: num(op, "radius")?,
            threshold: num(op, "threshold")?,
            quality: quality(op)?,
            mode: match text(op, "mode")? {
                "normal" => SmartMode::Normal,
                "edge-preservation" => SmartMode::EdgePreservation,
                "stroke-enhancement" => SmartMode::StrokeEnhancement,
                other => return Err(bad(op, &format!("unknown mode `{other}`"))),
            },
        }),
        "custom-convolution" => {
            let k = ints(op, "kernel", 25)?;
            let mut kernel = [0i32; 25];
            for (o, v) in kernel.iter_mut().zip(k) {
                *o = *v as i32;
            }
            Filter(FilterSpec::Custom { kernel, scale: num(op, "scale")? as i32, offset: num(op, "offset")? as i32 })
        }
        "lens-blur" => Filter(FilterSpec::Lens(LensSpec {
            blades: blades(op)?,
            radius: num(op, "aperture_radius")?,
            blade_curvature: num(op, "blade_curvature")?,
            rotation_deg: num(op, "rotation_angle")?,
            brightness: num_or(op, "brightness", 100.0)?,
            threshold: num(op, "threshold")?,
            noise: num(op, "amount")?,
            distribution: distribution(op)?,
        })),
        "surface-blur" => {
            Filter(FilterSpec::Surface { radius: num(op, "radius")? as u32, threshold: num(op, "threshold")? })
        }
        "color-balance" => {
            let s = ints(op, "sliders", 3)?;
            Color(ColorSpec::Balance { sliders: [s[0] as i32, s[1] as i32, s[2] as i32] })
        }
        "color-curves" => Color(ColorSpec::Curves(match text(op, "curve")? {
            "raise-highlights" => CurveKind::RaiseHighlights,
            "lower-shadows" => CurveKind::LowerShadows,
            other => return Err(bad(op, &format!("unknown curve `{other}`"))),
        })),
        "hue-saturation" => Color(ColorSpec::HueSaturation {
            hue: num(op, "hue")? as i32,
            saturation: num(op, "saturation")? as i32,
            lightness: num(op, "lightness")? as i32,
        }),
        "stroke" => Effect(EffectSpec::Stroke {
            size: num(op, "size")? as u32,
            position: match text(op, "position")? {
                "inside" => StrokePosition::Inside,
                "center" => StrokePosition::Center,
                "outside" => StrokePosition::Outside,
                other => return Err(bad(op, &format!("unknown stroke position `{other}`"))),
            },
            blend: blend(op)?,
            opacity: num_or(op, "opacity", 100.0)?,
            color: color(op, "color")?,
        }),
        "drop-shadow" => Effect(EffectSpec::DropShadow {
            blend: blend(op)?,
            color: color(op, "color")?,
            opacity: num(op, "opacity")?,
            angle: num(op, "angle")?,
            distance: num(op, "distance")? as u32,
            spread: num(op, "spread")?,
            size: num(op, "size")? as u32,
            noise: num(op, "noise")?,
        }),
        "outer-glow" => Effect(EffectSpec::OuterGlow {
            color: color(op, "color")?,
            opacity: num(op, "opacity")?,
            noise: num(op, "noise")?,
            spread: num_or(op, "spread", 5.0)? as u32,
        }),
        "noise" => Effect(EffectSpec::Noise {
            amount: num(op, "amount")?,
            distribution: distribution(op)?,
            monochromatic: yes(op, "monochromatic")?,
        }),
        _ => return Ok(None),
    };
    Ok(Some(spec))
}

/// Removal spec for a content-removal variant.
pub fn removal_spec(op: &ResolvedOp) -> Result<RemovalSpec, PipelineError> {
    Ok(match op.variant.as_str() {
        "content-aware-fill" => RemovalSpec::ContentAware { iterations: num(op, "iterations")? as u32 },
        "solid-color-fill" => RemovalSpec::SolidFill { color: color(op, "color")? },
        "background-clone" => RemovalSpec::BackgroundClone,
        "clone-stamp" => {
            RemovalSpec::CloneStamp { opacity: num_or(op, "opacity", 100.0)?, flow: num_or(op, "flow", 100.0)? }
        }
        "healing-brush" => RemovalSpec::HealingBrush {
            mode: match text(op, "mode")? {
                "normal" => HealMode::Normal,
                "replace" => HealMode::Replace,
                other => return Err(bad(op, &format!("unknown healing mode `{other}`"))),
            },
        },
        other => return Err(bad(op, &format!("`{other}` is not a removal variant"))),
    })
}

/// Shape-extraction method for a step-2.1 variant of copy-move/splicing.
pub fn extract_method(op: &ResolvedOp) -> Result<Option<ExtractMethod>, PipelineError> {
    Ok(match op.variant.as_str() {
        "magic-wand" => Some(ExtractMethod::MagicWand {
            tolerance: num(op, "tolerance")?.clamp(0.0, 255.0) as u8,
            contiguous: yes(op, "contiguous")?,
            anti_alias: yes(op, "anti_alias")?,
        }),
        "channel-levels-extraction" => {
            let ch = text(op, "channel")?;
            Some(ExtractMethod::Levels {
                channel: Channel::parse(ch).ok_or_else(|| bad(op, &format!("unknown channel `{ch}`")))?,
                input_lo: num(op, "input_low")?.clamp(0.0, 255.0) as u8,
                input_hi: num(op, "input_high")?.clamp(0.0, 255.0) as u8,
            })
        }
        _ => None,
    })
}

/// Font family and anti-aliasing from a font-properties op; colour is
/// filled in by the caller.
pub fn text_style(op: Option<&ResolvedOp>) -> Result<TextStyle, PipelineError> {
    let mut style =
        TextStyle { family: "Times New Roman".into(), size: None, color: [0; 3], anti_alias: AntiAlias::Smooth };
    if let Some(op) = op {
        style.family = text(op, "font")?.to_string();
        let aa = text(op, "anti_aliasing")?;
        style.anti_alias = AntiAlias::parse(aa).ok_or_else(|| bad(op, &format!("unknown anti-aliasing `{aa}`")))?;
    }
    Ok(style)
}

pub(crate) fn real(op: &ResolvedOp, name: &str) -> Result<f64, PipelineError> {
    num(op, name)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ParameterTable, Phase};
    use crate::sampler::{derive_stream, sample_parameter};

    /// Every variant in the default table resolves to a spec (or is a
    /// known main-step variant) for random parameter draws.
    #[test]
    fn every_table_variant_maps() {
        let table = ParameterTable::default_table();
        let mut rng = derive_stream(5, "post");
        for spec in &table.types {
            for (step, g) in spec.groups() {
                for v in &g.variants {
                    for _ in 0..20 {
                        let op = ResolvedOp {
                            op_id: g.op_id,
                            variant: v.name.clone(),
                            phase: step.phase,
                            params: v.params.iter().map(|p| (p.name.clone(), sample_parameter(p, &mut rng))).collect(),
                        };
                        let mapped = post_spec(&op).unwrap();
                        if step.phase == Phase::Post {
                            assert!(mapped.is_some(), "{}", v.name);
                        }
                        if step.name == "Content Removal" || (v.name.contains("fill") || v.name.contains("clone") || v.name == "healing-brush") {
                            removal_spec(&op).unwrap();
                        }
                        extract_method(&op).unwrap();
                        if v.name == "font-properties" {
                            text_style(Some(&op)).unwrap();
                        }
                    }
                }
            }
        }
    }
}
