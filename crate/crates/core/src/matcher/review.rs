use crate::store::{CodeSetId, Store};

pub const REVIEW_HEADER: [&str; 5] = ["object_string", "rank", "code_id", "main_string", "distance"];

/// Tab-separated review file of every stored match in a code set, sorted by
/// object string then rank. An object with no code within z gets a single
/// row with rank 0 and empty code columns.
pub fn review_export(store: &Store, code_set_id: &CodeSetId) -> crate::Result<String> {
    let code_set = store.code_set(code_set_id)?;
    let mut matches = store.matches_in(code_set_id);
    matches.sort_by(|a, b| a.object_text.cmp(&b.object_text));
    let mut w = csv::WriterBuilder::new()
        .delimiter(b'\t')
        .quote_style(csv::QuoteStyle::Necessary)
        .from_writer(Vec::new());
    let csv_err = |e: csv::Error| crate::Error::io("writing match review", std::io::Error::other(e));
    w.write_record(REVIEW_HEADER).map_err(csv_err)?;
    for m in &matches {
        if m.ranked.is_empty() {
            w.write_record([m.object_text.as_str(), "0", "", "", ""]).map_err(csv_err)?;
            continue;
        }
        for (i, r) in m.ranked.iter().enumerate() {
            let main = store
                .code(&code_set.terminology_id, &r.code_id)
                .map(|c| c.main_text().to_string())
                .unwrap_or_default();
            w.write_record([
                m.object_text.as_str(),
                &(i + 1).to_string(),
                &r.code_id,
                &main,
                &r.distance.to_string(),
            ])
            .map_err(csv_err)?;
        }
    }
    let bytes = w.into_inner().map_err(|e| crate::Error::io("writing match review", e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("utf-8 input"))
}
