use super::CaptionError;

/// The five sections a generation must contain, in order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SectionKind {
    /// Mood and visual features of the thumbnail itself.
    Thumbnail,
    /// Listening situation, scenario and setting.
    Situation,
    /// Times of day and seasons.
    TimeSeason,
    /// Emotions felt while listening.
    Emotion,
    /// One sentence summarising the situation, time/season and emotion sections.
    Summary,
}

impl SectionKind {
    pub const ORDER: [SectionKind; 5] = [
        SectionKind::Thumbnail,
        SectionKind::Situation,
        SectionKind::TimeSeason,
        SectionKind::Emotion,
        SectionKind::Summary,
    ];
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SectionSpec {
    pub kind: SectionKind,
    pub instruction: String,
}

/// Preamble plus five ordered section instructions.
///
/// The default wording is a reconstruction from the prompt's documented
/// structure; it can be replaced wholesale as long as the section order is kept.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptTemplate {
    preamble: String,
    sections: Vec<SectionSpec>,
}

const DEFAULT_PREAMBLE: &str = "You are shown the thumbnail image of a music video. \
Answer in exactly five numbered sections, starting each with its number (\"1.\" to \"5.\"). \
Describe the image only in section 1; sections 2 to 5 must talk about the music, not the picture.";

const DEFAULT_INSTRUCTIONS: [&str; 5] = [
    "Describe the mood and the visual features of the thumbnail image.",
    "From that mood and those features, describe the situation, scenario and setting in which this music would best be listened to.",
    "Describe the times of day and the seasons that suit listening to this music.",
    "Describe the emotions a listener would feel while listening to this music.",
    "Write one sentence that summarizes sections 2, 3 and 4 as a caption for the music, without mentioning the image.",
];

impl PromptTemplate {
    pub fn new(preamble: impl Into<String>, sections: Vec<SectionSpec>) -> Result<Self, CaptionError> {
        let kinds: Vec<SectionKind> = sections.iter().map(|s| s.kind).collect();
        if kinds != SectionKind::ORDER {
            return Err(CaptionError::InvalidTemplate(format!(
                "sections must be {:?}, got {:?}",
                SectionKind::ORDER,
                kinds
            )));
        }
        if let Some(pos) = sections.iter().position(|s| s.instruction.trim().is_empty()) {
            return Err(CaptionError::InvalidTemplate(format!("section {} has no instruction", pos + 1)));
        }
        Ok(Self {
            preamble: preamble.into(),
            sections,
        })
    }

    pub fn sections(&self) -> &[SectionSpec] {
        &self.sections
    }

    pub fn preamble(&self) -> &str {
        &self.preamble
    }
}

impl Default for PromptTemplate {
    fn default() -> Self {
        let sections = SectionKind::ORDER
            .iter()
            .zip(DEFAULT_INSTRUCTIONS)
            .map(|(kind, instruction)| SectionSpec {
                kind: *kind,
                instruction: instruction.to_string(),
            })
            .collect();
        Self::new(DEFAULT_PREAMBLE, sections).expect("default template is well-formed")
    }
}

/// Render the template as preamble followed by "1." .. "5." instructions.
pub fn render_prompt(template: &PromptTemplate) -> String {
    let mut out = String::new();
    if !template.preamble.trim().is_empty() {
        out.push_str(template.preamble.trim());
        out.push_str("\n\n");
    }
    for (i, s) in template.sections.iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        out.push_str(&format!("{}. {}", i + 1, s.instruction.trim()));
    }
    out
}

/// Text-only prompt for the tag-based baseline.
pub fn render_tag_prompt(tags: &[String]) -> String {
    format!(
        "The following music tags describe a track: {}.\n\
         Write a music caption of one or two sentences for this track. Include the tags themselves, \
         and describe its non-musical aspects: the situations it suits, the times of day or seasons \
         it suits, and the emotions it evokes.",
        tags.join(", ")
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_renders_five_numbered_lines() {
        let text = render_prompt(&PromptTemplate::default());
        for n in 1..=5 {
            assert!(text.lines().any(|l| l.starts_with(&format!("{n}. "))), "missing {n}.");
        }
        assert!(!text.lines().any(|l| l.starts_with("6. ")));
        assert_eq!(text, render_prompt(&PromptTemplate::default()));
    }

    #[test]
    fn reordered_sections_fail_at_construction() {
        let mut sections = PromptTemplate::default().sections().to_vec();
        sections.swap(1, 2);
        assert!(matches!(
            PromptTemplate::new("x", sections),
            Err(CaptionError::InvalidTemplate(_))
        ));
        let four = PromptTemplate::default().sections()[..4].to_vec();
        assert!(PromptTemplate::new("x", four).is_err());
    }

    #[test]
    fn tag_prompt_lists_every_tag() {
        let tags: Vec<String> = (0..20).map(|i| format!("tag{i}")).collect();
        let p = render_tag_prompt(&tags);
        assert!(p.contains(&tags.join(", ")));
        for t in &tags {
            assert!(p.contains(t.as_str()));
        }
    }
}
