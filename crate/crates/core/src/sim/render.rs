use super::{PageSpec, WidgetSpec};
use crate::raster::{RasterImage, Rgb};

/// Paints the page as flat rectangles in list order (later over earlier).
pub fn render_page(page: &PageSpec) -> RasterImage {
    render_widgets(page, &page.widgets)
}

/// Like [`render_page`] but with an explicit widget list, e.g. the live
/// widgets of a simulation state.
///
/// Widget text is drawn as a solid bar in a contrasting color, 60% of the
/// widget height, centered. The bar never covers half the widget, so the
/// fill stays the dominant color.
pub fn render_widgets(page: &PageSpec, widgets: &[WidgetSpec]) -> RasterImage {
    let canvas = page.canvas;
    let mut img = RasterImage::filled(canvas.w, canvas.h, page.background);
    for w in widgets.iter().filter(|w| w.is_visible()) {
        let x = i64::from(w.bounds.x) - i64::from(canvas.x);
        let y = i64::from(w.bounds.y) - i64::from(canvas.y);
        img.fill_rect(x, y, w.bounds.w, w.bounds.h, w.fill);
        if let Some(text) = w.text.as_deref().filter(|t| !t.trim().is_empty()) {
            let bar_h = ((f64::from(w.bounds.h) * 0.6).round() as u32).max(1);
            let glyph_w = (bar_h / 2).max(1);
            let chars = text.chars().count() as u32;
            let bar_w = (chars * glyph_w).min((f64::from(w.bounds.w) * 0.8) as u32).max(1);
            let color = if w.fill.luma() > 128.0 { Rgb::BLACK } else { Rgb::WHITE };
            let bx = x + i64::from((w.bounds.w - bar_w.min(w.bounds.w)) / 2);
            let by = y + i64::from((w.bounds.h - bar_h.min(w.bounds.h)) / 2);
            img.fill_rect(bx, by, bar_w, bar_h, color);
        }
    }
    img
}

#[cfg(test)]
mod tests {
    use super::super::{fixtures::TWO_PAGE, load_model, FaultSpec, SimState};
    use super::*;
    use crate::ies::Selector;
    use crate::raster::{dominant_color, Bounds};

    fn page(widgets: Vec<WidgetSpec>) -> PageSpec {
        PageSpec {
            canvas: Bounds::new(0, 0, 20, 10).unwrap(),
            background: Rgb::new(240, 240, 240),
            widgets,
        }
    }

    fn rect(name: &str, b: [u32; 4], fill: Rgb) -> WidgetSpec {
        WidgetSpec {
            name: name.into(),
            role: "panel".into(),
            bounds: Bounds::new(b[0], b[1], b[2], b[3]).unwrap(),
            fill,
            states: super::super::default_states(),
            actions: Default::default(),
            text: None,
        }
    }

    #[test]
    fn empty_page_is_background() {
        let img = render_page(&page(vec![]));
        assert!(img.pixels().iter().all(|&p| p == Rgb::new(240, 240, 240)));
        assert_eq!((img.width(), img.height()), (20, 10));
    }

    #[test]
    fn later_widget_paints_over_earlier() {
        let img = render_page(&page(vec![
            rect("a", [0, 0, 10, 10], Rgb::new(255, 0, 0)),
            rect("b", [5, 0, 10, 10], Rgb::new(0, 0, 255)),
        ]));
        assert_eq!(img.get(2, 2), Some(Rgb::new(255, 0, 0)));
        assert_eq!(img.get(7, 2), Some(Rgb::new(0, 0, 255)));
        assert_eq!(img.get(17, 2), Some(Rgb::new(240, 240, 240)));
    }

    #[test]
    fn hidden_widgets_not_painted() {
        let mut w = rect("a", [0, 0, 10, 10], Rgb::new(255, 0, 0));
        w.states.clear();
        let img = render_page(&page(vec![w]));
        assert_eq!(img.get(2, 2), Some(Rgb::new(240, 240, 240)));
    }

    #[test]
    fn text_bar_keeps_fill_dominant() {
        let mut w = rect("a", [0, 0, 20, 10], Rgb::new(0, 122, 255));
        w.text = Some("a very long label indeed".into());
        let img = render_page(&page(vec![w]));
        assert!(img.pixels().contains(&Rgb::WHITE));
        assert_eq!(img.dominant_color(), Some(Rgb::new(0, 122, 255)));
    }

    #[test]
    fn wrong_fill_fault_region_sampling() {
        let mut m = load_model(TWO_PAGE).unwrap();
        m.faults.push(FaultSpec::WrongFill {
            target: Selector::named("Save"),
            rgb: Rgb::new(200, 0, 0),
        });
        let img = SimState::initial(&m).render(&m);
        let save = m.pages["main"].widgets[1].bounds;
        let region = img.crop(&save).unwrap();
        assert!(region.pixels().iter().all(|&p| p == Rgb::new(200, 0, 0)));
        assert_eq!(dominant_color(region.pixels().iter().copied()), Some(Rgb::new(200, 0, 0)));
    }
}
