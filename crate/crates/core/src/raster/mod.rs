//! Pixel primitives used by the tampering executors.
//!
//! Every operation takes an input buffer by reference and returns a new
//! buffer; pixels outside the operation's effective geometry are copied
//! through untouched. Kernels sample clamp-to-edge from the whole image.

mod buffer;
mod color;
mod effect;
mod extract;
mod filter;
mod removal;
mod text;
mod transform;

pub use buffer::{clamp_u8, luma, ImageBuffer, Layer, PixelMask, Rect, RegionGeometry};
pub use color::{apply_color_adjustment, curve_lut, hsl_to_rgb, levels_lut, rgb_to_hsl};
pub use effect::{apply_effect, effect_reach};
pub use extract::extract_text_shape;
pub use filter::{apply_filter, gaussian_kernel};
pub use removal::apply_removal;
pub use text::{render_text_into, render_text_layer, FontBook, FONT_DIR_ENV};
pub use transform::{composite_layer, composite_paste, transform_layer, transform_region};

#[derive(thiserror::Error, Debug, Clone, PartialEq)]
pub enum RasterError {
    #[error("image has zero width or height")]
    EmptyImage,
    #[error("buffer length does not match dimensions")]
    BadDimensions,
    #[error("region has zero width or height")]
    DegenerateRegion,
    #[error("region {0:?} lies outside the image")]
    OutOfBounds(Rect),
    #[error("invalid parameter: {0}")]
    BadParameter(String),
    #[error("region covers the whole image; no source pixels around it")]
    NoSourceRing,
    #[error("effect needs a shape mask")]
    MissingShape,
    #[error("no font configured for family `{0}`")]
    UnknownFont(String),
    #[error("failed to load font: {0}")]
    FontLoad(String),
    #[error("placement lies entirely outside the image")]
    OutsideCanvas,
}

/// How [`extract_text_shape`] separates glyph pixels from background.
#[derive(Clone, Debug, PartialEq)]
pub enum ExtractMethod {
    MagicWand { tolerance: u8, contiguous: bool, anti_alias: bool },
    Levels { channel: Channel, input_lo: u8, input_hi: u8 },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Channel {
    Red,
    Green,
    Blue,
    /// All three channels.
    Rgb,
}

impl Channel {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "red" => Some(Channel::Red),
            "green" => Some(Channel::Green),
            "blue" => Some(Channel::Blue),
            "rgb" => Some(Channel::Rgb),
            _ => None,
        }
    }
}

/// Target size for [`transform_region`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Scale {
    Factor(f64),
    /// Largest aspect-preserving scale that fits `w x h`.
    AdaptiveTo { w: u32, h: u32 },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RadialMethod {
    Spin,
    Zoom,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Quality {
    Low,
    Medium,
    High,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SmartMode {
    Normal,
    EdgePreservation,
    StrokeEnhancement,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NoiseDistribution {
    Uniform,
    Gaussian,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LensSpec {
    /// Polygon side count (5..=8).
    pub blades: u32,
    /// Aperture radius in [0,1]; mapped to 1..=9 px of bokeh radius.
    pub radius: f64,
    /// 0 = straight polygon edges, 1 = circle.
    pub blade_curvature: f64,
    pub rotation_deg: f64,
    /// Specular brightness in percent.
    pub brightness: f64,
    /// Share (percent) of the brightest luma range treated as specular.
    pub threshold: f64,
    /// Noise amount in percent.
    pub noise: f64,
    pub distribution: NoiseDistribution,
}

#[derive(Clone, Debug, PartialEq)]
pub enum FilterSpec {
    /// Unsharp mask; `amount` in percent, `radius` in px, `threshold` in
    /// levels, repeated `iterations` times.
    Sharpen { amount: f64, radius: f64, threshold: f64, iterations: u32 },
    Gaussian { radius: f64 },
    Motion { angle: f64, distance: f64 },
    Radial { method: RadialMethod, quality: Quality },
    Smart { radius: f64, threshold: f64, quality: Quality, mode: SmartMode },
    Surface { radius: u32, threshold: f64 },
    Lens(LensSpec),
    /// 3x3 box.
    Mean,
    /// 3x3 binomial.
    Blur,
    /// 5x5 binomial.
    BlurMore,
    Custom { kernel: [i32; 25], scale: i32, offset: i32 },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BlendMode {
    Normal,
    Multiply,
    Darken,
}

impl BlendMode {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "normal" => Some(BlendMode::Normal),
            "multiply" => Some(BlendMode::Multiply),
            "darken" => Some(BlendMode::Darken),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StrokePosition {
    Inside,
    Center,
    Outside,
}

#[derive(Clone, Debug, PartialEq)]
pub enum EffectSpec {
    /// `opacity` in percent.
    Stroke { size: u32, position: StrokePosition, blend: BlendMode, opacity: f64, color: [u8; 3] },
    /// `opacity`, `spread` and `noise` in percent; `distance` and `size` in px.
    DropShadow {
        blend: BlendMode,
        color: [u8; 3],
        opacity: f64,
        angle: f64,
        distance: u32,
        spread: f64,
        size: u32,
        noise: f64,
    },
    OuterGlow { color: [u8; 3], opacity: f64, noise: f64, spread: u32 },
    /// `amount` in percent of full scale.
    Noise { amount: f64, distribution: NoiseDistribution, monochromatic: bool },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum HealMode {
    /// Shift the copy by the per-channel mean difference of the rings.
    Normal,
    /// Shift by the luma difference only, equally on every channel.
    Replace,
}

#[derive(Clone, Debug, PartialEq)]
pub enum RemovalSpec {
    ContentAware { iterations: u32 },
    SolidFill { color: [u8; 3] },
    BackgroundClone,
    /// `opacity` and `flow` in percent.
    CloneStamp { opacity: f64, flow: f64 },
    HealingBrush { mode: HealMode },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CurveKind {
    Identity,
    RaiseHighlights,
    LowerShadows,
}

#[derive(Clone, Debug, PartialEq)]
pub enum ColorSpec {
    /// Midtone cyan-red, magenta-green, yellow-blue sliders in [-100,100].
    Balance { sliders: [i32; 3] },
    Curves(CurveKind),
    HueSaturation { hue: i32, saturation: i32, lightness: i32 },
    Levels { channel: Channel, input: (u8, u8), output: (u8, u8) },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AntiAlias {
    None,
    Sharp,
    Crisp,
    Smooth,
    Strong,
}

impl AntiAlias {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "none" => Some(AntiAlias::None),
            "sharp" => Some(AntiAlias::Sharp),
            "crisp" => Some(AntiAlias::Crisp),
            "smooth" => Some(AntiAlias::Smooth),
            "strong" => Some(AntiAlias::Strong),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TextStyle {
    pub family: String,
    /// Pixel height; `None` fits the region height.
    pub size: Option<f32>,
    pub color: [u8; 3],
    pub anti_alias: AntiAlias,
}

/// Writes `values` (one per pixel of `geom.rect`) into a copy of `img`,
/// blending by the shape coverage when there is one.
pub(crate) fn write_region(img: &ImageBuffer, geom: &RegionGeometry, values: &[[f64; 3]]) -> ImageBuffer {
    let mut out = img.clone();
    let r = geom.rect;
    for (i, (x, y)) in r.pixels().enumerate() {
        let cov = geom.coverage(x, y);
        if cov == 0 {
            continue;
        }
        let v = values[i];
        let px = if cov == 255 {
            [clamp_u8(v[0]), clamp_u8(v[1]), clamp_u8(v[2])]
        } else {
            let a = cov as f64 / 255.0;
            let o = img.get(x, y);
            [
                clamp_u8(o[0] as f64 + (v[0].clamp(0.0, 255.0) - o[0] as f64) * a),
                clamp_u8(o[1] as f64 + (v[1].clamp(0.0, 255.0) - o[1] as f64) * a),
                clamp_u8(o[2] as f64 + (v[2].clamp(0.0, 255.0) - o[2] as f64) * a),
            ]
        };
        out.set(x, y, px);
    }
    out
}
