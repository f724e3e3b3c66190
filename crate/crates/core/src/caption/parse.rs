use std::sync::LazyLock;

use regex::Regex;

use super::CaptionError;

pub const SECTION_COUNT: usize = 5;

/// A generation split into its five sections.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParsedGeneration {
    pub sections: [String; SECTION_COUNT],
    pub raw: String,
}

impl ParsedGeneration {
    /// The image description (section 1).
    pub fn thumbnail(&self) -> &str {
        &self.sections[0]
    }

    /// The summarising caption (section 5).
    pub fn summary(&self) -> &str {
        &self.sections[4]
    }
}

/// Heading styles recognised at the start of a line.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MarkerStyle {
    /// `1.`
    Dot,
    /// `1)`
    Paren,
    /// `Section 1:`
    Section,
    /// `**1.**`
    BoldDot,
}

impl MarkerStyle {
    pub const ALL: [MarkerStyle; 4] = [
        MarkerStyle::Dot,
        MarkerStyle::Paren,
        MarkerStyle::Section,
        MarkerStyle::BoldDot,
    ];

    pub fn marker(self, n: usize) -> String {
        match self {
            MarkerStyle::Dot => format!("{n}."),
            MarkerStyle::Paren => format!("{n})"),
            MarkerStyle::Section => format!("Section {n}:"),
            MarkerStyle::BoldDot => format!("**{n}.**"),
        }
    }
}

static MARKER: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"^\s*(?:\*\*(\d+)\.\*\*|(?i:section)\s+(\d+)\s*:|(\d+)[.)])(?:\s+|$)(.*)$")
        .expect("marker regex")
});

fn marker_of(line: &str) -> Option<(usize, &str)> {
    let caps = MARKER.captures(line)?;
    let num = caps.get(1).or(caps.get(2)).or(caps.get(3))?;
    let n = num.as_str().parse().ok()?;
    Some((n, caps.get(4).map_or("", |m| m.as_str())))
}

/// Split a response on numbered headings.
///
/// A heading line starts a new section only when it carries the next
/// expected number; other numbered lines (nested lists, out-of-order
/// numbers) stay in the current section body. Text before the first
/// heading is ignored. A sixth heading is an error, as is a missing or
/// empty section.
pub fn parse_sections(raw: &str) -> Result<ParsedGeneration, CaptionError> {
    let mut bodies: Vec<Vec<&str>> = Vec::with_capacity(SECTION_COUNT);
    for line in raw.lines() {
        match marker_of(line) {
            Some((n, rest)) if n == bodies.len() + 1 => {
                if n > SECTION_COUNT {
                    return Err(CaptionError::TooManySections);
                }
                bodies.push(vec![rest]);
            }
            _ => {
                if let Some(body) = bodies.last_mut() {
                    body.push(line);
                }
            }
        }
    }
    if bodies.len() < SECTION_COUNT {
        return Err(CaptionError::MissingSection(bodies.len() + 1));
    }
    let mut sections: [String; SECTION_COUNT] = Default::default();
    for (i, body) in bodies.into_iter().enumerate() {
        let text = body.join("\n").trim().to_string();
        if text.is_empty() {
            return Err(CaptionError::EmptySection(i + 1));
        }
        sections[i] = text;
    }
    Ok(ParsedGeneration {
        sections,
        raw: raw.to_string(),
    })
}

/// Lay out section bodies under numbered headings, one heading per line.
pub fn format_sections(sections: &[String], style: MarkerStyle) -> String {
    sections
        .iter()
        .enumerate()
        .map(|(i, s)| format!("{} {}", style.marker(i + 1), s))
        .collect::<Vec<_>>()
        .join("\n")
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const CANNED: &str = "Sure, here is the analysis.\n\
1. The thumbnail shows a neon city skyline at night with purple tones.\n\
2. Perfect for a late-night drive through empty streets.\n\
3. Best at midnight in late autumn.\n\
4. Listeners feel energized yet a little melancholic.\n\
5. An energetic track for a late-night autumn drive that leaves you energized and wistful.";

    #[test]
    fn canned_response_has_five_sections() {
        let p = parse_sections(CANNED).unwrap();
        assert!(p.sections.iter().all(|s| !s.is_empty()));
        assert!(p.summary().starts_with("An energetic track"));
        assert!(p.thumbnail().contains("neon city"));
    }

    #[test]
    fn four_blocks_is_missing_fifth() {
        let four: String = CANNED.lines().take(5).collect::<Vec<_>>().join("\n");
        assert!(matches!(parse_sections(&four), Err(CaptionError::MissingSection(5))));
    }

    #[test]
    fn sixth_heading_is_rejected() {
        let six = format!("{CANNED}\n6. Extra.");
        assert!(matches!(parse_sections(&six), Err(CaptionError::TooManySections)));
    }

    #[test]
    fn paren_and_dot_styles_agree() {
        let paren = CANNED.replace("1. ", "1) ").replace("2. ", "2) ").replace("3. ", "3) ").replace("4. ", "4) ").replace("5. ", "5) ");
        let a = parse_sections(CANNED).unwrap();
        let b = parse_sections(&paren).unwrap();
        assert_eq!(a.sections, b.sections);
    }

    #[test]
    fn empty_summary_fails_in_parse() {
        let text = "1. a\n2. b\n3. c\n4. d\n5.   \n";
        assert!(matches!(parse_sections(text), Err(CaptionError::EmptySection(5))));
    }

    #[test]
    fn nested_numbering_stays_in_body() {
        let text = "1. image\n2. situations:\n1. driving\n2. studying\n3. night\n4. calm\n5. summary";
        let p = parse_sections(text).unwrap();
        assert_eq!(p.sections[1], "situations:\n1. driving\n2. studying");
    }

    #[test]
    fn heading_on_its_own_line() {
        let text = "Section 1:\nimage\nSection 2:\nsit\nsection 3:\ntime\nSection 4:\nemo\nSection 5:\nsum";
        let p = parse_sections(text).unwrap();
        assert_eq!(p.sections, ["image", "sit", "time", "emo", "sum"].map(String::from));
    }

    fn body(first: &'static str) -> impl Strategy<Value = String> {
        // Words never begin with a digit, so bodies cannot look like headings.
        prop::collection::vec(first, 1..12).prop_map(|w| w.join(" "))
    }

    proptest! {
        #[test]
        fn format_then_parse_recovers_bodies(
            image in body("[A-Z][A-Z0-9,']{2,8}"),
            rest in prop::collection::vec(body("[a-z][a-z0-9,']{0,8}"), 4),
            style_idx in 0usize..4,
        ) {
            let style = MarkerStyle::ALL[style_idx];
            let mut bodies = vec![image];
            bodies.extend(rest);
            let text = format_sections(&bodies, style);
            let parsed = parse_sections(&text).unwrap();
            prop_assert_eq!(parsed.sections.to_vec(), bodies.clone());
            // Section 1 uses a disjoint vocabulary, so any leak into the caption would show.
            for word in parsed.thumbnail().split_whitespace() {
                prop_assert!(!parsed.summary().contains(word));
            }
        }
    }
}
