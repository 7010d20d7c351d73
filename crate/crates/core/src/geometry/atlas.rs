//! Braak stage grouping of atlas regions.
//!
//! Region names are matched after lower-casing, dropping punctuation,
//! hemisphere prefixes (`ctx-lh-`, `Left-`, ...) and `gyrus`/`cortex`
//! suffixes, so `ctx-lh-parahippocampal` and `Parahippocampal gyrus` both
//! resolve. Names `II`..`VI` (optionally prefixed `Braak`/`stage`) assign a
//! region to a stage directly, which is how synthetic slab domains are labelled.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;

use super::RegionId;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum BraakStage {
    II,
    III,
    IV,
    V,
    VI,
}

impl BraakStage {
    pub const ALL: [BraakStage; 5] = [
        BraakStage::II,
        BraakStage::III,
        BraakStage::IV,
        BraakStage::V,
        BraakStage::VI,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn roman(self) -> &'static str {
        match self {
            BraakStage::II => "II",
            BraakStage::III => "III",
            BraakStage::IV => "IV",
            BraakStage::V => "V",
            BraakStage::VI => "VI",
        }
    }

    /// Macrostage label: 0-II, III-IV or V-VI.
    pub fn macrostage(self) -> &'static str {
        match self {
            BraakStage::II => "0-II",
            BraakStage::III | BraakStage::IV => "III-IV",
            BraakStage::V | BraakStage::VI => "V-VI",
        }
    }

    /// Parses `II`, `braak_iii`, `Stage 4`, `5`, ...
    pub fn parse(s: &str) -> Option<Self> {
        let n = normalize(s);
        let n = n
            .strip_prefix("braak")
            .or_else(|| n.strip_prefix("stage"))
            .unwrap_or(&n);
        match n {
            "ii" | "2" => Some(BraakStage::II),
            "iii" | "3" => Some(BraakStage::III),
            "iv" | "4" => Some(BraakStage::IV),
            "v" | "5" => Some(BraakStage::V),
            "vi" | "6" => Some(BraakStage::VI),
            _ => None,
        }
    }
}

impl fmt::Display for BraakStage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.roman())
    }
}

/// Anatomical regions per stage (Braak I, transentorhinal, is not parcellated).
pub const CANONICAL_STAGE_NAMES: [(BraakStage, &[&str]); 5] = [
    (BraakStage::II, &["entorhinal", "hippocampus"]),
    (
        BraakStage::III,
        &["amygdala", "parahippocampal", "fusiform", "lingual"],
    ),
    (
        BraakStage::IV,
        &[
            "insula",
            "inferiortemporal",
            "lateraltemporal",
            "posteriorcingulate",
            "inferiorparietal",
        ],
    ),
    (
        BraakStage::V,
        &[
            "orbitofrontal",
            "superiortemporal",
            "inferiorfrontal",
            "cuneus",
            "anteriorcingulate",
            "supramarginal",
            "lateraloccipital",
            "precuneus",
            "superiorfrontal",
            "rostromedialfrontal",
        ],
    ),
    (
        BraakStage::VI,
        &["paracentral", "postcentral", "precentral", "pericalcarine"],
    ),
];

/// Parcellation-specific spellings mapped onto canonical names.
const ALIASES: [(&str, &str); 12] = [
    ("hippocampal", "hippocampus"),
    ("lateralorbitofrontal", "orbitofrontal"),
    ("medialorbitofrontal", "orbitofrontal"),
    ("middletemporal", "lateraltemporal"),
    ("rostralanteriorcingulate", "anteriorcingulate"),
    ("caudalanteriorcingulate", "anteriorcingulate"),
    ("parsopercularis", "inferiorfrontal"),
    ("parstriangularis", "inferiorfrontal"),
    ("parsorbitalis", "inferiorfrontal"),
    ("rostralmiddlefrontal", "rostromedialfrontal"),
    ("insular", "insula"),
    ("periclacarine", "pericalcarine"),
];

const NON_NEOCORTICAL: [&str; 2] = ["hippocampus", "amygdala"];
const TAU_SEED: [&str; 2] = ["entorhinal", "parahippocampal"];

fn normalize(s: &str) -> String {
    s.chars()
        .filter(|c| c.is_ascii_alphanumeric())
        .map(|c| c.to_ascii_lowercase())
        .collect()
}

/// Braak stage of an anatomical region name, if it belongs to one.
pub fn stage_of_name(name: &str) -> Option<BraakStage> {
    BraakStage::parse(name).or_else(|| canonical(name).map(|(_, s)| s))
}

fn canonical(name: &str) -> Option<(&'static str, BraakStage)> {
    let mut n = normalize(name);
    for prefix in ["ctxlh", "ctxrh", "left", "right", "lh", "rh"] {
        if let Some(rest) = n.strip_prefix(prefix) {
            if !rest.is_empty() {
                n = rest.to_string();
                break;
            }
        }
    }
    for suffix in ["gyrus", "cortices", "cortex"] {
        if let Some(rest) = n.strip_suffix(suffix) {
            if !rest.is_empty() {
                n = rest.to_string();
                break;
            }
        }
    }
    let n = ALIASES
        .iter()
        .find(|(a, _)| *a == n)
        .map(|(_, c)| c.to_string())
        .unwrap_or(n);
    CANONICAL_STAGE_NAMES
        .iter()
        .find_map(|(stage, names)| names.iter().find(|c| **c == n).map(|c| (*c, *stage)))
}

#[derive(Clone, Debug, PartialEq)]
pub struct BraakAtlas {
    stages: BTreeMap<BraakStage, BTreeSet<RegionId>>,
    neocortex: BTreeSet<RegionId>,
    abeta_seed: BTreeSet<RegionId>,
    tau_seed: BTreeSet<RegionId>,
    names: BTreeMap<RegionId, String>,
}

impl BraakAtlas {
    /// Strict construction: every anatomical name of the stage table must resolve,
    /// unless the table labels stages directly (`II`..`VI`).
    pub fn from_table(entries: &[(String, RegionId)]) -> Result<Self> {
        let (atlas, unresolved) = Self::build(entries)?;
        if !unresolved.is_empty() {
            return Err(Error::UnresolvedNames { names: unresolved });
        }
        Ok(atlas)
    }

    /// Like [`from_table`](Self::from_table) but only fails when a whole stage is
    /// empty; unresolved anatomical names are returned alongside.
    pub fn from_table_lenient(entries: &[(String, RegionId)]) -> Result<(Self, Vec<String>)> {
        Self::build(entries)
    }

    fn build(entries: &[(String, RegionId)]) -> Result<(Self, Vec<String>)> {
        let mut stages: BTreeMap<BraakStage, BTreeSet<RegionId>> = BraakStage::ALL
            .iter()
            .map(|s| (*s, BTreeSet::new()))
            .collect();
        let mut owner: BTreeMap<RegionId, BraakStage> = BTreeMap::new();
        let mut found: BTreeSet<&'static str> = BTreeSet::new();
        let mut neocortex = BTreeSet::new();
        let mut tau_seed = BTreeSet::new();
        let mut names = BTreeMap::new();
        let mut direct = false;
        for (name, id) in entries {
            let (stage, canon) = if let Some(stage) = BraakStage::parse(name) {
                direct = true;
                (stage, None)
            } else if let Some((canon, stage)) = canonical(name) {
                found.insert(canon);
                (stage, Some(canon))
            } else {
                log::debug!("atlas region `{name}` ({id}) is not part of any Braak stage");
                continue;
            };
            if let Some(prev) = owner.insert(*id, stage) {
                if prev != stage {
                    return Err(Error::Staging(format!(
                        "region {id} assigned to both Braak {prev} and Braak {stage}"
                    )));
                }
            }
            stages.get_mut(&stage).unwrap().insert(*id);
            names.insert(*id, name.clone());
            match canon {
                None => {
                    neocortex.insert(*id);
                    if stage == BraakStage::II {
                        tau_seed.insert(*id);
                    }
                }
                Some(c) => {
                    if !NON_NEOCORTICAL.contains(&c) {
                        neocortex.insert(*id);
                    }
                    if TAU_SEED.contains(&c) {
                        tau_seed.insert(*id);
                    }
                }
            }
        }
        let unresolved: Vec<String> = if direct {
            Vec::new()
        } else {
            CANONICAL_STAGE_NAMES
                .iter()
                .flat_map(|(_, n)| n.iter())
                .filter(|n| !found.contains(*n))
                .map(|n| n.to_string())
                .collect()
        };
        for (stage, ids) in &stages {
            if ids.is_empty() {
                return Err(Error::EmptyStage(stage.to_string()));
            }
        }
        let abeta_seed = neocortex.clone();
        Ok((
            Self {
                stages,
                neocortex,
                abeta_seed,
                tau_seed,
                names,
            },
            unresolved,
        ))
    }

    /// Five ordered slabs, one region per stage II..VI.
    pub fn ordered_slabs(ids: [RegionId; 5]) -> Self {
        let entries: Vec<(String, RegionId)> = BraakStage::ALL
            .iter()
            .zip(ids)
            .map(|(s, id)| (s.roman().to_string(), id))
            .collect();
        Self::from_table(&entries).expect("slab atlas is well formed")
    }

    /// Reads `region_name,region_id` rows; a header row is optional.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)?;
        Self::from_table(&parse_table(&text, path)?)
    }

    pub fn stage(&self, stage: BraakStage) -> &BTreeSet<RegionId> {
        &self.stages[&stage]
    }

    pub fn stages(&self) -> impl Iterator<Item = (BraakStage, &BTreeSet<RegionId>)> {
        self.stages.iter().map(|(s, r)| (*s, r))
    }

    pub fn neocortex(&self) -> &BTreeSet<RegionId> {
        &self.neocortex
    }

    /// Cerebral-cortex seeding for amyloid-beta.
    pub fn abeta_seed(&self) -> &BTreeSet<RegionId> {
        &self.abeta_seed
    }

    /// Entorhinal cortex and rostral parahippocampal seeding for tau.
    pub fn tau_seed(&self) -> &BTreeSet<RegionId> {
        &self.tau_seed
    }

    pub fn name(&self, id: RegionId) -> Option<&str> {
        self.names.get(&id).map(String::as_str)
    }

    pub fn region_ids(&self) -> BTreeSet<RegionId> {
        self.stages.values().flatten().copied().collect()
    }

    /// Checks that every atlas region exists in the domain label set.
    pub fn validate_against(&self, labels: &[RegionId]) -> Result<()> {
        let missing: Vec<RegionId> = self
            .region_ids()
            .into_iter()
            .filter(|id| !labels.contains(id))
            .collect();
        if missing.is_empty() {
            Ok(())
        } else {
            Err(Error::UnknownRegions { ids: missing })
        }
    }
}

pub(crate) fn parse_table(text: &str, path: &Path) -> Result<Vec<(String, RegionId)>> {
    let mut entries = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let l = raw.trim();
        if l.is_empty() || l.starts_with('#') {
            continue;
        }
        let (name, id) = l.rsplit_once(',').ok_or_else(|| Error::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            message: "expected `region_name,region_id`".into(),
        })?;
        if name.trim() == "region_name" {
            continue;
        }
        let id = id.trim().parse::<RegionId>().map_err(|_| Error::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            message: format!("cannot parse region id `{}`", id.trim()),
        })?;
        entries.push((name.trim().to_string(), id));
    }
    Ok(entries)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn desikan_like() -> Vec<(String, RegionId)> {
        let mut out = Vec::new();
        let mut id = 1000;
        for (_, names) in CANONICAL_STAGE_NAMES {
            for n in names {
                id += 1;
                out.push((format!("ctx-lh-{n}"), id));
            }
        }
        out.push(("ctx-lh-bankssts".into(), 2000));
        out
    }

    #[test]
    fn stage_table_sizes() {
        let sizes: Vec<usize> = CANONICAL_STAGE_NAMES.iter().map(|(_, n)| n.len()).collect();
        assert_eq!(sizes, vec![2, 4, 5, 10, 4]);
    }

    #[test]
    fn slab_atlas_has_one_region_per_stage() {
        let atlas = BraakAtlas::ordered_slabs([1, 2, 3, 4, 5]);
        for (i, (stage, ids)) in atlas.stages().enumerate() {
            assert_eq!(stage.index(), i);
            assert_eq!(ids.len(), 1);
            assert!(ids.contains(&(i as RegionId + 1)));
        }
        assert_eq!(
            atlas.tau_seed().iter().copied().collect::<Vec<_>>(),
            vec![1]
        );
        assert_eq!(atlas.abeta_seed().len(), 5);
    }

    #[test]
    fn desikan_style_table_resolves_ten_stage_v_regions() {
        let atlas = BraakAtlas::from_table(&desikan_like()).unwrap();
        assert_eq!(atlas.stage(BraakStage::V).len(), 10);
        assert_eq!(atlas.tau_seed().len(), 2);
        assert!(!atlas.region_ids().contains(&2000));
        // Stages are pairwise disjoint.
        let all: Vec<RegionId> = atlas
            .stages()
            .flat_map(|(_, ids)| ids.iter().copied())
            .collect();
        let set: BTreeSet<RegionId> = all.iter().copied().collect();
        assert_eq!(all.len(), set.len());
    }

    #[test]
    fn missing_hippocampus_is_reported() {
        let table: Vec<_> = desikan_like()
            .into_iter()
            .filter(|(n, _)| !n.contains("hippocampus"))
            .collect();
        match BraakAtlas::from_table(&table) {
            Err(Error::UnresolvedNames { names }) => assert_eq!(names, vec!["hippocampus"]),
            other => panic!("{other:?}"),
        }
        let (atlas, unresolved) = BraakAtlas::from_table_lenient(&table).unwrap();
        assert_eq!(unresolved, vec!["hippocampus"]);
        assert_eq!(atlas.stage(BraakStage::II).len(), 1);
    }

    #[test]
    fn empty_stage_is_an_error() {
        let table: Vec<_> = desikan_like()
            .into_iter()
            .filter(|(n, _)| !(n.contains("entorhinal") || n.contains("hippocampus")))
            .collect();
        assert!(matches!(
            BraakAtlas::from_table_lenient(&table),
            Err(Error::EmptyStage(s)) if s == "II"
        ));
    }

    #[test]
    fn name_normalization() {
        assert_eq!(
            canonical("Left-Hippocampus").map(|c| c.0),
            Some("hippocampus")
        );
        assert_eq!(
            canonical("Parahippocampal gyrus").map(|c| c.0),
            Some("parahippocampal")
        );
        assert_eq!(
            canonical("ctx-rh-precuneus").map(|c| c.0),
            Some("precuneus")
        );
        assert_eq!(canonical("ctx-rh-cuneus").map(|c| c.0), Some("cuneus"));
        assert_eq!(BraakStage::parse("Braak_IV"), Some(BraakStage::IV));
        assert_eq!(BraakStage::parse("stage 6"), Some(BraakStage::VI));
    }
}
