use super::ConceptSpan;

/// Keeps one span per maximal interval.
///
/// A span is dropped when its `[start, end)` interval lies strictly inside
/// another span's interval. Spans with identical intervals collapse to the one
/// with the most tokens, then the lexicographically smallest CUI. Overlapping
/// but non-nested spans are both kept. Output is sorted by start.
pub fn subsumption_filter(spans: &[ConceptSpan]) -> Vec<ConceptSpan> {
    let mut sorted: Vec<&ConceptSpan> = spans.iter().collect();
    // containers sort before anything they contain
    sorted.sort_by(|a, b| {
        a.start
            .cmp(&b.start)
            .then(b.end.cmp(&a.end))
            .then(b.n_tokens.cmp(&a.n_tokens))
            .then_with(|| a.cui.cmp(&b.cui))
    });

    let mut kept = Vec::new();
    let mut max_end = None;
    for span in sorted {
        if max_end.is_none_or(|m| span.end > m) {
            max_end = Some(span.end);
            kept.push(span.clone());
        }
    }
    kept
}
