//! Text rasterization with selectable anti-aliasing.
//!
//! Family names map to font files through a [`FontBook`]. The built-in
//! book embeds DejaVu fonts (see `assets/fonts/LICENSE-DejaVu`) as the
//! stand-ins for the five named families; setting `TAMPERKIT_FONT_DIR` to a
//! directory containing `fonts.toml` (a `[families]` table of family name
//! to file name) overrides individual families. Unknown families are an
//! error.
//!
//! Anti-aliasing maps glyph coverage `c` to alpha: none thresholds at 0.5,
//! sharp is `c^1.6` on 16 levels, crisp `c^1.2` on 32 levels, smooth is
//! linear, strong is `c^0.7`.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::OnceLock;

use ab_glyph::{point, Font, FontArc, PxScale, ScaleFont};

use super::{composite_layer, AntiAlias, ImageBuffer, Layer, RasterError, Rect, RegionGeometry, TextStyle};

pub const FONT_DIR_ENV: &str = "TAMPERKIT_FONT_DIR";

static SANS: &[u8] = include_bytes!("../../assets/fonts/DejaVuSans.ttf");
static SANS_BOLD: &[u8] = include_bytes!("../../assets/fonts/DejaVuSans-Bold.ttf");
static SERIF: &[u8] = include_bytes!("../../assets/fonts/DejaVuSerif.ttf");
static MONO: &[u8] = include_bytes!("../../assets/fonts/DejaVuSansMono.ttf");

const BUILTIN: [(&str, &[u8]); 5] = [
    ("Times New Roman", SERIF),
    ("SimSun", SERIF),
    ("KaiTi", MONO),
    ("Microsoft YaHei", SANS),
    ("SimHei", SANS_BOLD),
];

#[derive(Clone)]
pub struct FontBook {
    fonts: BTreeMap<String, FontArc>,
}

impl std::fmt::Debug for FontBook {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FontBook").field("families", &self.fonts.keys().collect::<Vec<_>>()).finish()
    }
}

impl FontBook {
    pub fn builtin() -> Self {
        let fonts = BUILTIN
            .iter()
            .map(|(name, bytes)| (name.to_string(), FontArc::try_from_slice(bytes).expect("embedded font parses")))
            .collect();
        Self { fonts }
    }

    /// Built-in book with overrides from `dir/fonts.toml`.
    pub fn with_dir(dir: &Path) -> Result<Self, RasterError> {
        #[derive(serde::Deserialize)]
        #[serde(deny_unknown_fields)]
        struct Manifest {
            families: BTreeMap<String, String>,
        }
        let manifest_path = dir.join("fonts.toml");
        let text = std::fs::read_to_string(&manifest_path)
            .map_err(|e| RasterError::FontLoad(format!("{}: {e}", manifest_path.display())))?;
        let m: Manifest =
            toml::from_str(&text).map_err(|e| RasterError::FontLoad(format!("{}: {e}", manifest_path.display())))?;
        let mut book = Self::builtin();
        for (family, file) in m.families {
            let path = dir.join(&file);
            let bytes = std::fs::read(&path).map_err(|e| RasterError::FontLoad(format!("{}: {e}", path.display())))?;
            let font = FontArc::try_from_vec(bytes).map_err(|e| RasterError::FontLoad(format!("{}: {e}", path.display())))?;
            book.fonts.insert(family, font);
        }
        Ok(book)
    }

    /// The process-wide book: built-in, or overridden by the font
    /// directory named in the environment (read once).
    pub fn global() -> Result<&'static FontBook, RasterError> {
        static BOOK: OnceLock<Result<FontBook, RasterError>> = OnceLock::new();
        BOOK.get_or_init(|| match std::env::var_os(FONT_DIR_ENV) {
            Some(dir) => FontBook::with_dir(Path::new(&dir)),
            None => Ok(FontBook::builtin()),
        })
        .as_ref()
        .map_err(Clone::clone)
    }

    pub fn get(&self, family: &str) -> Result<&FontArc, RasterError> {
        self.fonts.get(family).ok_or_else(|| RasterError::UnknownFont(family.to_string()))
    }

    pub fn families(&self) -> impl Iterator<Item = &str> {
        self.fonts.keys().map(String::as_str)
    }
}

fn map_coverage(c: f32, aa: AntiAlias) -> f32 {
    let c = c.clamp(0.0, 1.0);
    let quant = |v: f32, n: f32| (v * n).round() / n;
    match aa {
        AntiAlias::None => {
            if c >= 0.5 {
                1.0
            } else {
                0.0
            }
        }
        AntiAlias::Sharp => quant(c.powf(1.6), 16.0),
        AntiAlias::Crisp => quant(c.powf(1.2), 32.0),
        AntiAlias::Smooth => c,
        AntiAlias::Strong => c.powf(0.7),
    }
}

/// Renders `text` into a `w x h` layer of solid `style.color`, alpha from
/// glyph coverage. Glyphs are sized to the layer height (unless the style
/// fixes a size), baseline-aligned and clipped at the right edge.
pub fn render_text_layer(book: &FontBook, text: &str, style: &TextStyle, w: u32, h: u32) -> Result<Layer, RasterError> {
    let n = text.chars().count();
    if !(1..=20).contains(&n) {
        return Err(RasterError::BadParameter(format!("text length {n} outside [1,20]")));
    }
    if w == 0 || h == 0 {
        return Err(RasterError::DegenerateRegion);
    }
    let font = book.get(&style.family)?;
    let px = style.size.unwrap_or(h as f32 * 0.95).max(1.0);
    let scale = PxScale::from(px);
    let scaled = font.as_scaled(scale);
    let baseline = (h as f32 - scaled.height()) / 2.0 + scaled.ascent();

    let mut cov = vec![0f32; w as usize * h as usize];
    let mut caret = 1.0f32;
    let mut prev = None;
    for ch in text.chars() {
        let id = font.glyph_id(ch);
        if let Some(p) = prev {
            caret += scaled.kern(p, id);
        }
        let glyph = id.with_scale_and_position(scale, point(caret, baseline));
        caret += scaled.h_advance(id);
        prev = Some(id);
        let Some(outlined) = font.outline_glyph(glyph) else { continue };
        let b = outlined.px_bounds();
        outlined.draw(|gx, gy, c| {
            let x = b.min.x as i64 + gx as i64;
            let y = b.min.y as i64 + gy as i64;
            if x >= 0 && y >= 0 && x < w as i64 && y < h as i64 {
                let i = y as usize * w as usize + x as usize;
                cov[i] = (cov[i] + c).min(1.0);
            }
        });
        if caret >= w as f32 {
            break;
        }
    }
    let alpha = cov.iter().map(|c| (map_coverage(*c, style.anti_alias) * 255.0).round() as u8).collect();
    Layer::new(ImageBuffer::new(w, h, style.color)?, alpha)
}

/// Renders `text` over `region.rect`; returns the image and the rectangle
/// actually written (the region, since the layer is clipped to it).
pub fn render_text_into(
    img: &ImageBuffer,
    region: &RegionGeometry,
    text: &str,
    style: &TextStyle,
) -> Result<(ImageBuffer, Rect), RasterError> {
    region.validate_within(img)?;
    let r = region.rect;
    let layer = render_text_layer(FontBook::global()?, text, style, r.w, r.h)?;
    composite_layer(img, &layer, (r.x as i64, r.y as i64))
}
