mod gen;

use hcmon::dsml::{parse_model, serialize_model, ModelKind, SourceModel};
use proptest::prelude::*;

fn kind_of(decl: &hcmon::dsml::Declaration) -> ModelKind {
    use hcmon::dsml::Declaration as D;
    match decl {
        D::Requirement(_) => ModelKind::Hcr,
        D::TechReq(_) => ModelKind::Tech,
        D::Component(_) | D::Connector(_) => ModelKind::Arch,
        D::Design(_) => ModelKind::Design,
        D::Context(_) => ModelKind::Context,
    }
}

fn assert_located(text: &str, result: &Result<SourceModel, Vec<hcmon::diag::Diagnostic>>) {
    let Err(diags) = result else { return };
    assert!(!diags.is_empty());
    let lines: Vec<&str> = text.split('\n').collect();
    for d in diags {
        let line = d.location.line as usize;
        assert!(line >= 1 && line <= lines.len(), "{d:?} in {} lines", lines.len());
        let width = lines[line - 1].chars().count();
        assert!(d.location.column >= 1 && d.location.column as usize <= width + 1, "{d:?} width {width}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn serialize_then_parse_is_identity(m in gen::any_model()) {
        let text = serialize_model(&m);
        let back = parse_model(&text, Some(m.kind)).map_err(|d| format!("{d:?}\n{text}")).unwrap();
        prop_assert_eq!(&back, &m);
        prop_assert_eq!(serialize_model(&back), text);
    }

    #[test]
    fn spans_point_at_declarations(m in gen::any_model()) {
        let text = serialize_model(&m);
        let back = parse_model(&text, None).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        for d in &back.declarations {
            let loc = back.location_of(d.id());
            let line = lines[loc.line as usize - 1];
            prop_assert!(line[loc.column as usize - 1..].contains(d.id()), "{} at {:?}", d.id(), loc);
        }
    }

    #[test]
    fn damaged_text_is_diagnosed_in_bounds(
        m in gen::any_model(),
        cut in any::<prop::sample::Index>(),
        len in 0usize..12,
        insert in "[{};:,\"()<=a-z0-9 \n]{0,3}",
    ) {
        let text = serialize_model(&m);
        let chars: Vec<char> = text.chars().collect();
        let at = cut.index(chars.len() + 1);
        let end = (at + len).min(chars.len());
        let damaged: String = chars[..at].iter().chain(insert.chars().collect::<Vec<_>>().iter()).chain(&chars[end..]).collect();
        let parsed = parse_model(&damaged, None);
        assert_located(&damaged, &parsed);
        if let Ok(model) = parsed {
            // Whatever parses keeps within its header's schema.
            for d in &model.declarations {
                prop_assert_eq!(kind_of(d), model.kind);
            }
        }
    }

    #[test]
    fn foreign_header_never_yields_foreign_declarations(m in gen::any_model(), other in gen::any_kind()) {
        let text = serialize_model(&m).replacen(&format!("model {} ", m.kind), &format!("model {other} "), 1);
        let parsed = parse_model(&text, None);
        assert_located(&text, &parsed);
        match parsed {
            Ok(model) => {
                prop_assert_eq!(model.kind, other);
                for d in &model.declarations {
                    prop_assert_eq!(kind_of(d), other);
                }
                prop_assert!(other == m.kind || m.declarations.is_empty());
            }
            Err(_) => prop_assert!(other != m.kind),
        }
    }

    #[test]
    fn arbitrary_text_never_panics(text in "\\PC{0,200}") {
        let parsed = parse_model(&text, None);
        assert_located(&text, &parsed);
    }
}
