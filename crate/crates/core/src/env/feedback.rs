use rand::Rng;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

use super::window::{Mask, ViewWindow, WindowShape};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeedbackVariant {
    Mask,
    Binary,
    NoisyMask,
    Language,
}

impl FeedbackVariant {
    pub fn name(self) -> &'static str {
        match self {
            FeedbackVariant::Mask => "mask",
            FeedbackVariant::Binary => "binary",
            FeedbackVariant::NoisyMask => "noisy",
            FeedbackVariant::Language => "language",
        }
    }
}

impl fmt::Display for FeedbackVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FeedbackVariant {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "mask" => Ok(FeedbackVariant::Mask),
            "binary" => Ok(FeedbackVariant::Binary),
            "noisy" | "noisy_mask" => Ok(FeedbackVariant::NoisyMask),
            "language" => Ok(FeedbackVariant::Language),
            other => Err(format!("unknown feedback variant `{other}` (mask, binary, noisy, language)")),
        }
    }
}

/// Teacher response carried by an observation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Feedback {
    Mask(Mask),
    /// 1 target in view, 0 not in view, -1 no ask this step.
    Binary(i8),
    NoisyMask(Mask),
    Language(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum FeedbackSignal {
    Absent,
    Given(Feedback),
}

/// Stable label used in episode logs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeedbackKind {
    Absent,
    Mask,
    Binary,
    NoisyMask,
    Language,
}

impl FeedbackSignal {
    pub fn kind(&self) -> FeedbackKind {
        match self {
            FeedbackSignal::Absent => FeedbackKind::Absent,
            FeedbackSignal::Given(Feedback::Mask(_)) => FeedbackKind::Mask,
            FeedbackSignal::Given(Feedback::Binary(_)) => FeedbackKind::Binary,
            FeedbackSignal::Given(Feedback::NoisyMask(_)) => FeedbackKind::NoisyMask,
            FeedbackSignal::Given(Feedback::Language(_)) => FeedbackKind::Language,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseParams {
    pub scale_min: f64,
    pub scale_max: f64,
    pub jitter_cells: i64,
}

impl Default for NoiseParams {
    fn default() -> Self {
        NoiseParams { scale_min: 0.6, scale_max: 1.0, jitter_cells: 1 }
    }
}

/// What the teacher knows about the target when answering an ask.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetView<'a> {
    pub category: &'a str,
    pub color: &'a str,
    /// Window slot of the target when it is visible.
    pub slot: Option<(usize, usize)>,
    /// Agent-to-target distance in length units.
    pub dist: f64,
    /// Distances up to this value are reported as close.
    pub close_within: f64,
}

pub fn ground_truth_mask(shape: WindowShape, target: &TargetView<'_>) -> Mask {
    let mut mask = Mask::zeros(shape.depth(), shape.width());
    if let Some((r, c)) = target.slot {
        mask.set(r, c, 1);
    }
    mask
}

/// Builds the response to an ask taken with the teacher present.
pub fn make_feedback<R: Rng + ?Sized>(
    variant: FeedbackVariant,
    window: &ViewWindow,
    target: &TargetView<'_>,
    noise: &NoiseParams,
    rng: &mut R,
) -> Feedback {
    match variant {
        FeedbackVariant::Mask => Feedback::Mask(ground_truth_mask(window.shape, target)),
        FeedbackVariant::Binary => Feedback::Binary(if target.slot.is_some() { 1 } else { 0 }),
        FeedbackVariant::NoisyMask => {
            Feedback::NoisyMask(perturb_mask(&ground_truth_mask(window.shape, target), noise, rng))
        }
        FeedbackVariant::Language => Feedback::Language(language_feedback(window.shape, target)),
    }
}

/// Channel content on steps where no ask was taken (teacher present).
pub fn not_asked_feedback(variant: FeedbackVariant, category: &str) -> FeedbackSignal {
    match variant {
        FeedbackVariant::Binary => FeedbackSignal::Given(Feedback::Binary(-1)),
        FeedbackVariant::Language => FeedbackSignal::Given(Feedback::Language(language_no_ask(category))),
        FeedbackVariant::Mask | FeedbackVariant::NoisyMask => FeedbackSignal::Absent,
    }
}

fn display_name(category: &str) -> String {
    category.replace('_', " ")
}

pub const POSITIONS: [[&str; 3]; 3] =
    [["top-left", "top", "top-right"], ["left", "middle", "right"], ["bottom-left", "bottom", "bottom-right"]];

/// 3x3 block of a slot: rows split into far/middle/near thirds, columns
/// into left/center/right thirds.
pub fn frame_block(shape: WindowShape, row: usize, col: usize) -> (usize, usize) {
    (row * 3 / shape.depth(), col * 3 / shape.width())
}

pub fn frame_position(shape: WindowShape, row: usize, col: usize) -> &'static str {
    let (br, bc) = frame_block(shape, row, col);
    POSITIONS[br][bc]
}

pub fn language_no_ask(category: &str) -> String {
    format!("The target object is {}.", display_name(category))
}

pub fn language_feedback(shape: WindowShape, target: &TargetView<'_>) -> String {
    let name = display_name(target.category);
    match target.slot {
        None => format!("The {name} is absent from the frame."),
        Some((row, col)) => {
            let range = if target.dist <= target.close_within + crate::gridworld::GEOM_EPS { "close" } else { "far" };
            format!("The {} {name} is {range}, at the {} of the frame.", target.color, frame_position(shape, row, col))
        }
    }
}

/// Parsed form of a language response, for agents consuming it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LanguageReading {
    NoAsk,
    Absent,
    Present { close: bool, block: (usize, usize) },
}

pub fn read_language(text: &str) -> Option<LanguageReading> {
    if text.starts_with("The target object is ") {
        return Some(LanguageReading::NoAsk);
    }
    if text.ends_with(" is absent from the frame.") {
        return Some(LanguageReading::Absent);
    }
    let rest = text.strip_suffix(" of the frame.")?;
    let (head, position) = rest.rsplit_once(", at the ")?;
    let close = if head.ends_with(" is close") {
        true
    } else if head.ends_with(" is far") {
        false
    } else {
        return None;
    };
    for (r, row) in POSITIONS.iter().enumerate() {
        for (c, name) in row.iter().enumerate() {
            if *name == position {
                return Some(LanguageReading::Present { close, block: (r, c) });
            }
        }
    }
    None
}

/// Scales the target blob along one random axis by a factor in
/// `[scale_min, scale_max]` about its center, then shifts each bounding-box
/// edge by an integer in `[-jitter, jitter]`. The result is clipped to the
/// window; an all-zero mask passes through unchanged.
pub fn perturb_mask<R: Rng + ?Sized>(mask: &Mask, noise: &NoiseParams, rng: &mut R) -> Mask {
    let Some((r0, r1, c0, c1)) = mask.bounding_box() else {
        return mask.clone();
    };
    let vertical = rng.gen_bool(0.5);
    let factor = if noise.scale_max > noise.scale_min {
        rng.gen_range(noise.scale_min..=noise.scale_max)
    } else {
        noise.scale_min
    };
    let j = noise.jitter_cells.max(0);
    let shifts: [i64; 4] = std::array::from_fn(|_| rng.gen_range(-j..=j));

    // Nearest-neighbour rescale about the blob's center along one axis.
    let mut scaled = Mask::zeros(mask.depth, mask.width);
    let (lo, hi) = if vertical { (r0, r1) } else { (c0, c1) };
    let center = (lo + hi + 1) as f64 / 2.0;
    for r in 0..mask.depth {
        for c in 0..mask.width {
            let along = if vertical { r } else { c };
            let src = center + (along as f64 + 0.5 - center) / factor;
            let src = src.floor();
            let limit = if vertical { mask.depth } else { mask.width };
            if src < 0.0 || src >= limit as f64 {
                continue;
            }
            let src = src as usize;
            let bit = if vertical { mask.get(src, c) } else { mask.get(r, src) };
            scaled.set(r, c, bit);
        }
    }
    let Some((sr0, sr1, sc0, sc1)) = scaled.bounding_box() else {
        return scaled;
    };

    // Edge jitter: resample the scaled box into the shifted box.
    let nr0 = sr0 as i64 + shifts[0];
    let nr1 = (sr1 as i64 + shifts[1]).max(nr0);
    let nc0 = sc0 as i64 + shifts[2];
    let nc1 = (sc1 as i64 + shifts[3]).max(nc0);
    let (old_h, old_w) = ((sr1 - sr0 + 1) as f64, (sc1 - sc0 + 1) as f64);
    let (new_h, new_w) = ((nr1 - nr0 + 1) as f64, (nc1 - nc0 + 1) as f64);
    let mut out = Mask::zeros(mask.depth, mask.width);
    for r in nr0.max(0)..=nr1.min(mask.depth as i64 - 1) {
        for c in nc0.max(0)..=nc1.min(mask.width as i64 - 1) {
            let sr = sr0 + (((r - nr0) as f64 + 0.5) * old_h / new_h).floor() as usize;
            let sc = sc0 + (((c - nc0) as f64 + 0.5) * old_w / new_w).floor() as usize;
            out.set(r as usize, c as usize, scaled.get(sr.min(sr1), sc.min(sc1)));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn shape() -> WindowShape {
        WindowShape::new(12)
    }

    #[test]
    fn zero_mask_passes_through() {
        let mask = Mask::zeros(13, 25);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert_eq!(perturb_mask(&mask, &NoiseParams::default(), &mut rng), mask);
    }

    #[test]
    fn unit_scale_no_jitter_is_identity() {
        let mut mask = Mask::zeros(13, 25);
        for (r, c) in [(3, 4), (3, 5), (4, 4), (4, 5), (5, 5)] {
            mask.set(r, c, 1);
        }
        let noise = NoiseParams { scale_min: 1.0, scale_max: 1.0, jitter_cells: 0 };
        for seed in 0..20 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            assert_eq!(perturb_mask(&mask, &noise, &mut rng), mask);
        }
    }

    #[test]
    fn perturbation_is_seed_deterministic_and_local() {
        let mut mask = Mask::zeros(13, 25);
        for r in 5..8 {
            for c in 10..13 {
                mask.set(r, c, 1);
            }
        }
        for seed in 0..50 {
            let a = perturb_mask(&mask, &NoiseParams::default(), &mut ChaCha8Rng::seed_from_u64(seed));
            let b = perturb_mask(&mask, &NoiseParams::default(), &mut ChaCha8Rng::seed_from_u64(seed));
            assert_eq!(a, b);
            let (r0, r1, c0, c1) = a.bounding_box().unwrap();
            assert!(r0 >= 4 && r1 <= 8 && c0 >= 9 && c1 <= 13, "{seed}: {:?}", a.bounding_box());
        }
    }

    #[test]
    fn binary_and_mask_semantics() {
        let window = ViewWindow::unseen(shape());
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let noise = NoiseParams::default();
        let seen = TargetView { category: "apple", color: "red", slot: Some((10, 12)), dist: 0.5, close_within: 1.0 };
        let unseen = TargetView { slot: None, ..seen.clone() };
        assert_eq!(make_feedback(FeedbackVariant::Binary, &window, &seen, &noise, &mut rng), Feedback::Binary(1));
        assert_eq!(make_feedback(FeedbackVariant::Binary, &window, &unseen, &noise, &mut rng), Feedback::Binary(0));
        assert_eq!(not_asked_feedback(FeedbackVariant::Binary, "apple"), FeedbackSignal::Given(Feedback::Binary(-1)));
        match make_feedback(FeedbackVariant::Mask, &window, &unseen, &noise, &mut rng) {
            Feedback::Mask(m) => assert_eq!(m.sum(), 0),
            other => panic!("{other:?}"),
        }
        match make_feedback(FeedbackVariant::Mask, &window, &seen, &noise, &mut rng) {
            Feedback::Mask(m) => assert_eq!(m.ones().collect::<Vec<_>>(), vec![(10, 12)]),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn language_templates() {
        let s = shape();
        let absent = TargetView { category: "apple", color: "red", slot: None, dist: 2.0, close_within: 1.0 };
        assert_eq!(language_feedback(s, &absent), "The apple is absent from the frame.");
        let center = TargetView { slot: Some((6, 12)), dist: 0.5, ..absent.clone() };
        assert_eq!(language_feedback(s, &center), "The red apple is close, at the middle of the frame.");
        let far = TargetView { slot: Some((0, 0)), dist: 2.5, ..absent.clone() };
        assert_eq!(language_feedback(s, &far), "The red apple is far, at the top-left of the frame.");
        assert_eq!(language_no_ask("bowl"), "The target object is bowl.");
        assert_eq!(language_no_ask("soap_bottle"), "The target object is soap bottle.");
    }

    #[test]
    fn language_reading_roundtrip() {
        let s = shape();
        for row in 0..s.depth() {
            for col in 0..s.width() {
                for dist in [0.5, 2.0] {
                    let t = TargetView {
                        category: "dish_sponge",
                        color: "yellow",
                        slot: Some((row, col)),
                        dist,
                        close_within: 1.0,
                    };
                    let read = read_language(&language_feedback(s, &t)).unwrap();
                    assert_eq!(read, LanguageReading::Present { close: dist <= 1.0, block: frame_block(s, row, col) });
                }
            }
        }
        assert_eq!(read_language("The cup is absent from the frame."), Some(LanguageReading::Absent));
        assert_eq!(read_language(&language_no_ask("cup")), Some(LanguageReading::NoAsk));
        assert_eq!(read_language("gibberish"), None);
    }
}
