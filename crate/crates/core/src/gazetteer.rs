//! City to county resolution backed by a versioned data file.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

const KANSAS_JSON: &str = include_str!("../../../data/gazetteer/kansas.json");

#[derive(Debug, Error)]
pub enum GazetteerError {
    #[error("reading gazetteer {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed gazetteer: {0}")]
    Malformed(#[from] serde_json::Error),
    #[error("city `{city}` maps to `{county}`, which is not in the county list")]
    UnknownCounty { city: String, county: String },
}

/// On-disk layout of a gazetteer file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GazetteerFile {
    pub version: String,
    pub state: String,
    pub counties: Vec<String>,
    pub cities: BTreeMap<String, String>,
}

#[derive(Debug, Clone)]
pub struct Gazetteer {
    version: String,
    state: String,
    // folded city key -> (display city, display county)
    cities: HashMap<String, (String, String)>,
    // folded county -> display county
    counties: HashMap<String, String>,
    max_city_words: usize,
}

/// Case-folds a place name and collapses punctuation so that `St. Francis`
/// and `st francis` share a key.
pub fn place_key(name: &str) -> String {
    name.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(|t| t.to_lowercase())
        .collect::<Vec<_>>()
        .join(" ")
}

impl Gazetteer {
    pub fn from_file_data(file: GazetteerFile) -> Result<Self, GazetteerError> {
        let counties: HashMap<String, String> = file
            .counties
            .iter()
            .map(|c| (place_key(c), c.clone()))
            .collect();
        let mut cities = HashMap::new();
        let mut max_city_words = 1;
        for (city, county) in &file.cities {
            let display_county = counties
                .get(&place_key(county))
                .cloned()
                .ok_or_else(|| GazetteerError::UnknownCounty {
                    city: city.clone(),
                    county: county.clone(),
                })?;
            let key = place_key(city);
            max_city_words = max_city_words.max(key.split(' ').count());
            cities.insert(key, (city.clone(), display_county));
        }
        Ok(Gazetteer {
            version: file.version,
            state: file.state,
            cities,
            counties,
            max_city_words,
        })
    }

    pub fn from_json(json: &str) -> Result<Self, GazetteerError> {
        Self::from_file_data(serde_json::from_str(json)?)
    }

    pub fn load(path: &Path) -> Result<Self, GazetteerError> {
        let text = std::fs::read_to_string(path).map_err(|source| GazetteerError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json(&text)
    }

    /// The bundled Kansas gazetteer.
    pub fn kansas() -> Self {
        Self::from_json(KANSAS_JSON).expect("bundled gazetteer is valid")
    }

    pub fn version(&self) -> &str {
        &self.version
    }

    pub fn state(&self) -> &str {
        &self.state
    }

    pub fn county_for_city(&self, city: &str) -> Option<&str> {
        self.cities.get(&place_key(city)).map(|(_, county)| county.as_str())
    }

    /// Canonical display form of a city, if known.
    pub fn city(&self, name: &str) -> Option<&str> {
        self.cities.get(&place_key(name)).map(|(city, _)| city.as_str())
    }

    /// Canonical county name; accepts an optional trailing "County".
    pub fn county(&self, name: &str) -> Option<&str> {
        let key = place_key(name);
        let key = key.strip_suffix(" county").unwrap_or(&key);
        self.counties.get(key).map(String::as_str)
    }

    pub fn is_county(&self, name: &str) -> bool {
        self.county(name).is_some()
    }

    pub fn max_city_words(&self) -> usize {
        self.max_city_words
    }

    pub fn counties(&self) -> BTreeSet<&str> {
        self.counties.values().map(String::as_str).collect()
    }

    pub fn cities(&self) -> impl Iterator<Item = (&str, &str)> {
        self.cities.values().map(|(c, k)| (c.as_str(), k.as_str()))
    }

    pub fn city_by_key(&self, key: &str) -> Option<&str> {
        self.cities.get(key).map(|(city, _)| city.as_str())
    }
}
