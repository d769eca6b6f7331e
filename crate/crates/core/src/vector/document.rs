use crate::model::PantryRecord;

/// Text embedded for a record: labeled fields in a fixed order, one per line.
pub fn record_to_document(record: &PantryRecord) -> String {
    let fields: [(&str, &str); 8] = [
        ("name", &record.name),
        ("street_address", &record.street_address),
        ("city", &record.city),
        ("county", &record.county),
        ("zip", &record.zip),
        ("hours_raw", &record.hours_raw),
        ("eligibility_notes", &record.eligibility_notes),
        ("notes", &record.notes),
    ];
    fields
        .iter()
        .map(|(label, value)| format!("{label}: {}", value.replace('\n', " ")))
        .collect::<Vec<_>>()
        .join("\n")
}
