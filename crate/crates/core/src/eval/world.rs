use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::context::{Normalizer, SimDocument, SimProfile, Tokenizer, WorldSource};
use crate::error::{Error, Result};
use crate::model::{ModelConfig, SegmentKind, TokenSegment};
use crate::rng::Rng;
use crate::training::MatchType;

// Word banks. Generation falls back to synthesized words ("item12") when a
// config outgrows a bank, so any size stays well-formed.
const NOUNS: [&str; 40] = [
    "reel", "rod", "tent", "kayak", "lantern", "router", "laptop", "camera", "drone", "monitor",
    "blender", "kettle", "sofa", "lamp", "mattress", "ledger", "wallet", "printer", "speaker",
    "keyboard", "helmet", "saddle", "compass", "stove", "parka", "tripod", "charger", "tablet",
    "mixer", "toaster", "recliner", "dresser", "curtain", "planner", "binder", "scanner",
    "headset", "webcam", "griddle", "skillet",
];
const HOMONYMS: [&str; 16] = [
    "apple", "jaguar", "bass", "crane", "python", "mercury", "amazon", "delta", "polo", "puma",
    "shell", "orion", "pilot", "falcon", "atlas", "nova",
];
const DISAMB: [&str; 80] = [
    "carbon", "wireless", "vintage", "digital", "folding", "thermal", "optical", "magnetic",
    "ceramic", "titanium", "acoustic", "electric", "manual", "hydraulic", "solar", "quartz",
    "leather", "bamboo", "chrome", "copper", "velvet", "granite", "woven", "matte", "glossy",
    "rugged", "slim", "curved", "ribbed", "padded", "insulated", "ventilated", "polarized",
    "serrated", "tapered", "braided", "anodized", "brushed", "forged", "molded", "quilted",
    "laminated", "perforated", "reinforced", "tempered", "galvanized", "enameled", "lacquered",
    "embossed", "engraved", "beveled", "fluted", "knurled", "ridged", "scalloped", "studded",
    "tufted", "veneered", "waxed", "zippered", "aerated", "buffered", "calibrated", "damped",
    "elevated", "filtered", "grounded", "heated", "ionized", "jointed", "keyed", "layered",
    "mounted", "notched", "oiled", "plated", "quenched", "riveted", "sealed", "threaded",
];
const MODIFIERS: [&str; 12] = [
    "best", "cheap", "buy", "new", "pro", "mini", "max", "compact", "deluxe", "premium", "budget",
    "portable",
];
const CATEGORY_WORDS: [&str; 8] = [
    "outdoor", "electronics", "kitchen", "furniture", "office", "sports", "garden", "travel",
];
const FILLER: [&str; 10] = [
    "guide", "review", "store", "deals", "online", "official", "sale", "catalog", "experts",
    "warehouse",
];
/// Words reserved for held-out test surfaces. They never occur in keywords,
/// documents, profiles, or training surfaces, so a model cannot have learned
/// anything from them — held-out queries must be resolved from the subject
/// word plus (when available) cached context.
const NEUTRAL: [&str; 24] = [
    "local", "nearby", "trusted", "modern", "classic", "quality", "reliable", "popular",
    "genuine", "affordable", "handy", "sturdy", "quiet", "speedy", "simple", "fancy", "robust",
    "tidy", "crisp", "gentle", "bold", "mellow", "brisk", "plush",
];
/// Shared (ambiguous) surface texts emitted per intent-pair group.
const SHARED_PER_GROUP: usize = 4;

fn bank_word(bank: &[&str], i: usize, prefix: &str) -> String {
    bank.get(i)
        .map(|w| w.to_string())
        .unwrap_or_else(|| format!("{prefix}{i}"))
}

/// Generation parameters for a synthetic world.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldConfig {
    pub categories: usize,
    pub intents: usize,
    /// Unshared training surfaces per intent (core-word based).
    pub surfaces_per_intent: usize,
    /// Held-out test surfaces per intent (neutral-word based).
    pub held_out_per_intent: usize,
    /// Target fraction of unique surfaces shared by >= 2 intents.
    pub ambiguous_rate: f64,
    pub exact_per_intent: usize,
    pub phrase_per_intent: usize,
    pub smart_per_intent: usize,
    pub docs_per_intent: usize,
    pub rewrites_per_intent: usize,
}

impl Default for WorldConfig {
    fn default() -> Self {
        WorldConfig {
            categories: 4,
            intents: 12,
            surfaces_per_intent: 2,
            held_out_per_intent: 2,
            ambiguous_rate: 0.30,
            // More exact keywords per intent than top-10 slots: an ambiguity
            // pair owns 20 exact keywords, so P@10 rewards ranking the right
            // intent's keywords, not merely reaching the shared pool.
            exact_per_intent: 10,
            phrase_per_intent: 2,
            smart_per_intent: 2,
            docs_per_intent: 10,
            rewrites_per_intent: 10,
        }
    }
}

impl WorldConfig {
    /// A deliberately tiny world for fast end-to-end tests.
    pub fn tiny() -> Self {
        WorldConfig {
            categories: 2,
            intents: 4,
            surfaces_per_intent: 2,
            held_out_per_intent: 1,
            ambiguous_rate: 0.30,
            exact_per_intent: 2,
            phrase_per_intent: 1,
            smart_per_intent: 1,
            docs_per_intent: 4,
            rewrites_per_intent: 4,
        }
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let parse_usize = |v: &str| {
            v.parse::<usize>()
                .map_err(|_| Error::Config(format!("bad integer {v:?} for {key}")))
        };
        match key {
            "categories" => self.categories = parse_usize(value)?,
            "intents" => self.intents = parse_usize(value)?,
            "surfaces_per_intent" => self.surfaces_per_intent = parse_usize(value)?,
            "held_out_per_intent" => self.held_out_per_intent = parse_usize(value)?,
            "ambiguous_rate" => {
                self.ambiguous_rate = value
                    .parse::<f64>()
                    .map_err(|_| Error::Config(format!("bad float {value:?} for {key}")))?
            }
            "exact_per_intent" => self.exact_per_intent = parse_usize(value)?,
            "phrase_per_intent" => self.phrase_per_intent = parse_usize(value)?,
            "smart_per_intent" => self.smart_per_intent = parse_usize(value)?,
            "docs_per_intent" => self.docs_per_intent = parse_usize(value)?,
            "rewrites_per_intent" => self.rewrites_per_intent = parse_usize(value)?,
            _ => return Err(Error::Config(format!("unknown world config key {key:?}"))),
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Intent {
    pub id: u32,
    pub category: u32,
    /// The word queries use for this intent (a homonym when ambiguous).
    pub subject: String,
    /// This intent's own unambiguous word.
    pub core: String,
    /// Tokens that uniquely identify the intent in context text.
    pub disambiguators: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldKeyword {
    pub id: u32,
    pub intent: u32,
    pub text: String,
    pub match_type: MatchType,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Surface {
    pub text: String,
    /// Linked intents; the first is dominant (what context resolves to).
    pub intents: Vec<u32>,
    /// Held out of training pairs (test-only surface).
    pub held_out: bool,
}

impl Surface {
    pub fn dominant(&self) -> u32 {
        self.intents[0]
    }

    pub fn is_ambiguous(&self) -> bool {
        self.intents.len() >= 2
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldPair {
    pub surface: String,
    pub intent: u32,
    pub keyword_id: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldQuery {
    pub surface: String,
    pub intent: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldDocument {
    pub title: String,
    pub snippet: String,
    pub country: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldProfile {
    pub rewrites: Vec<String>,
    pub intent: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticWorld {
    pub seed: u64,
    pub config: WorldConfig,
    pub categories: Vec<String>,
    pub intents: Vec<Intent>,
    /// Keyword id = index.
    pub keywords: Vec<WorldKeyword>,
    pub surfaces: Vec<Surface>,
    pub docs: BTreeMap<u32, Vec<WorldDocument>>,
    pub profiles: BTreeMap<u32, WorldProfile>,
    pub train_pairs: Vec<WorldPair>,
    pub test_queries: Vec<WorldQuery>,
    /// Tokenizer word list covering every text in the world.
    pub vocab: Vec<String>,
}

/// Deterministically generate a synthetic retrieval world: intents grouped
/// into cross-category ambiguity pairs that share homonym surfaces, keyword
/// text that reuses the shared subject word (so surface alone cannot
/// separate the intents), and context text that carries intent-unique
/// disambiguator tokens (so context can). Test queries are held-out
/// surfaces whose only non-subject word is an otherwise-unused NEUTRAL
/// token, leaving context as the sole disambiguation signal.
pub fn generate_world(config: &WorldConfig, seed: u64) -> Result<SyntheticWorld> {
    if config.intents < 2 {
        return Err(Error::Config("world needs at least 2 intents".into()));
    }
    if config.categories < 1 || config.categories > config.intents {
        return Err(Error::Config(format!(
            "categories must be in 1..=intents, got {}",
            config.categories
        )));
    }
    if config.surfaces_per_intent < 1 {
        return Err(Error::Config(
            "world needs at least 1 unshared training surface per intent".into(),
        ));
    }
    if config.held_out_per_intent < 1 {
        return Err(Error::Config(
            "world needs at least 1 held-out surface per intent".into(),
        ));
    }
    if config.exact_per_intent < 1 || config.phrase_per_intent < 1 || config.smart_per_intent < 1 {
        return Err(Error::Config(
            "every intent needs at least one exact, phrase, and smart keyword".into(),
        ));
    }
    if !(0.0..=1.0).contains(&config.ambiguous_rate) {
        return Err(Error::Config(format!(
            "ambiguous_rate must be in [0,1], got {}",
            config.ambiguous_rate
        )));
    }

    // Each ambiguity group links 2 intents, which jointly emit
    // SHARED_PER_GROUP identical (hence merged, ambiguous) surface texts.
    // Every intent also keeps its own unshared training and held-out
    // surfaces, so the unique-surface total is
    // groups*SHARED_PER_GROUP + intents*(own + held_out); solve for the
    // group count whose merged share reaches the requested rate.
    let rate = config.ambiguous_rate;
    let per_intent = config.surfaces_per_intent + config.held_out_per_intent;
    let groups_possible = config.intents / 2;
    let groups_needed = if rate <= 0.0 {
        0
    } else if rate >= 1.0 {
        groups_possible + 1 // unreachable share; force the feasibility error
    } else {
        ((rate * (config.intents * per_intent) as f64)
            / (SHARED_PER_GROUP as f64 * (1.0 - rate)))
            .ceil() as usize
    };
    if groups_needed > groups_possible {
        return Err(Error::Config(format!(
            "ambiguous_rate {rate} needs {groups_needed} ambiguity links but only \
             {groups_possible} intent pairs exist"
        )));
    }
    let n_groups = groups_needed;

    let mut rng = Rng::new(seed).derive("world");

    let categories: Vec<String> = (0..config.categories)
        .map(|c| bank_word(&CATEGORY_WORDS, c, "sector"))
        .collect();

    // Intent tables. Intent i sits in category i % C; intents 2g and 2g+1
    // form ambiguity group g (consecutive intents always differ in category
    // when C >= 2).
    let mut intents = Vec::with_capacity(config.intents);
    for i in 0..config.intents {
        let group = if i / 2 < n_groups { Some(i / 2) } else { None };
        let core = bank_word(&NOUNS, i, "item");
        let subject = match group {
            Some(g) => bank_word(&HOMONYMS, g, "homonym"),
            None => core.clone(),
        };
        intents.push(Intent {
            id: i as u32,
            category: (i % config.categories) as u32,
            subject,
            core,
            disambiguators: vec![
                bank_word(&DISAMB, 3 * i, "grade"),
                bank_word(&DISAMB, 3 * i + 1, "series"),
                bank_word(&DISAMB, 3 * i + 2, "model"),
            ],
        });
    }

    // Surfaces. Both intents of a group emit the same SHARED_PER_GROUP
    // homonym texts, which merge into ambiguous surfaces whose dominant
    // reading is the lower intent id (first writer). Every intent adds
    // unshared core-based training surfaces plus held-out test surfaces
    // built from NEUTRAL words that occur nowhere else in the world.
    let mut surface_map: BTreeMap<String, (Vec<u32>, bool)> = BTreeMap::new();
    let mut order: Vec<String> = Vec::new();
    let add_surface = |text: String, intent: u32, held_out: bool,
                           surface_map: &mut BTreeMap<String, (Vec<u32>, bool)>,
                           order: &mut Vec<String>| {
        let slot = surface_map.entry(text.clone()).or_insert_with(|| {
            order.push(text);
            (Vec::new(), held_out)
        });
        if !slot.0.contains(&intent) {
            slot.0.push(intent);
        }
        slot.1 = slot.1 && held_out;
    };
    for intent in &intents {
        let i = intent.id as usize;
        let grouped = i / 2 < n_groups;
        let s = &intent.subject;
        if grouped {
            let g = i / 2;
            let mod_a = bank_word(&MODIFIERS, g % MODIFIERS.len(), "mod");
            let mod_b = bank_word(&MODIFIERS, (g + 3) % MODIFIERS.len(), "mod");
            for text in [
                s.clone(),
                format!("{mod_a} {s}"),
                format!("{s} {mod_b}"),
                format!("{mod_a} {s} {mod_b}"),
            ]
            .into_iter()
            .take(SHARED_PER_GROUP)
            {
                add_surface(text, intent.id, false, &mut surface_map, &mut order);
            }
        }
        for j in 0..config.surfaces_per_intent {
            let text = match j {
                0 => intent.core.clone(),
                1 => format!("{} {}", intent.core, categories[intent.category as usize]),
                _ => format!(
                    "{} {}",
                    bank_word(&MODIFIERS, (i + j) % MODIFIERS.len(), "mod"),
                    intent.core
                ),
            };
            add_surface(text, intent.id, false, &mut surface_map, &mut order);
        }
        for j in 0..config.held_out_per_intent {
            let neutral = bank_word(
                &NEUTRAL,
                (i * config.held_out_per_intent + j) % NEUTRAL.len(),
                "plain",
            );
            add_surface(format!("{neutral} {s}"), intent.id, true, &mut surface_map, &mut order);
        }
    }
    let surfaces: Vec<Surface> = order
        .into_iter()
        .map(|text| {
            let (intents, held_out) = surface_map.remove(&text).expect("ordered key");
            Surface { text, intents, held_out }
        })
        .collect();

    // Keywords: subject + disambiguators (exact), with modifiers (phrase),
    // and category-word forms (smart). A global set keeps texts unique.
    let mut keywords = Vec::new();
    let mut seen_kw = BTreeSet::new();
    let push_kw = |text: String, intent: u32, match_type: MatchType,
                       keywords: &mut Vec<WorldKeyword>,
                       seen: &mut BTreeSet<String>,
                       rng: &mut Rng| {
        let mut t = text;
        while !seen.insert(t.clone()) {
            t = format!("{t} {}", bank_word(&FILLER, rng.next_below(FILLER.len()), "extra"));
        }
        keywords.push(WorldKeyword {
            id: keywords.len() as u32,
            intent,
            text: t,
            match_type,
        });
    };
    for intent in &intents {
        let s = &intent.subject;
        let d0 = &intent.disambiguators[0];
        let d1 = &intent.disambiguators[1];
        let d2 = &intent.disambiguators[2];
        let cat = &categories[intent.category as usize];
        let i = intent.id as usize;

        // Uniform three-token exact forms (equal-length scoring, no length
        // shortcut) over the subject and the intent's three disambiguators.
        // A retriever that only matches the shared subject word cannot fill
        // the top ranks with one intent's exact keywords, and three forms
        // carry no d0 at all — they stay starved until context covers the
        // secondary disambiguators too.
        let exact_templates = [
            format!("{d0} {d1} {s}"),
            format!("{d1} {d0} {s}"),
            format!("{d0} {s} {d1}"),
            format!("{d1} {s} {d0}"),
            format!("{s} {d0} {d1}"),
            format!("{s} {d1} {d0}"),
            format!("{d2} {d0} {s}"),
            format!("{d2} {d1} {s}"),
            format!("{d1} {d2} {s}"),
            format!("{s} {d2} {d1}"),
        ];
        for t in exact_templates.iter().cycle().take(config.exact_per_intent) {
            push_kw(t.clone(), intent.id, MatchType::Exact, &mut keywords, &mut seen_kw, &mut rng);
        }
        let m0 = bank_word(&MODIFIERS, i % MODIFIERS.len(), "mod");
        let m1 = bank_word(&MODIFIERS, (i + 3) % MODIFIERS.len(), "mod");
        let phrase_templates = [
            format!("{m0} {s} {d0}"),
            format!("{s} {d1} {m1}"),
            format!("{m1} {d0} {s}"),
            format!("{m0} {d1} {s}"),
        ];
        for t in phrase_templates.iter().cycle().take(config.phrase_per_intent) {
            push_kw(t.clone(), intent.id, MatchType::Phrase, &mut keywords, &mut seen_kw, &mut rng);
        }
        let smart_templates = [
            format!("{cat} {s}"),
            format!("{s} {cat}"),
            format!("{cat} {d0}"),
            format!("{cat} {d1} {s}"),
        ];
        for t in smart_templates.iter().cycle().take(config.smart_per_intent) {
            push_kw(t.clone(), intent.id, MatchType::Smart, &mut keywords, &mut seen_kw, &mut rng);
        }
    }

    // Documents and profiles. Clean items each carry one alternating
    // disambiguator (so extra context instances add evidence rather than
    // repeat it); items past rank 8 (docs) / 6 (rewrites) are filler-diluted
    // noise, modeling the low-quality tail of real web results.
    let mut docs = BTreeMap::new();
    let mut profiles = BTreeMap::new();
    for intent in &intents {
        let s = &intent.subject;
        let ds = &intent.disambiguators;
        let cat = &categories[intent.category as usize];
        let intent_docs: Vec<WorldDocument> = (0..config.docs_per_intent)
            .map(|j| {
                let d = &ds[j % ds.len()];
                let f = bank_word(&FILLER, j % FILLER.len(), "page");
                if j < 8 {
                    WorldDocument {
                        title: format!("{d} {s} {f}"),
                        snippet: format!("{s} {d} {cat} {f}"),
                        country: "US".into(),
                    }
                } else {
                    let f2 = bank_word(&FILLER, (j + 3) % FILLER.len(), "page");
                    let f3 = bank_word(&FILLER, (j + 5) % FILLER.len(), "page");
                    WorldDocument {
                        title: format!("{f} {s} {f2}"),
                        snippet: format!("{s} {f} {f2} {f3}"),
                        country: "US".into(),
                    }
                }
            })
            .collect();
        docs.insert(intent.id, intent_docs);
        let rewrites: Vec<String> = (0..config.rewrites_per_intent)
            .map(|j| {
                let d = &ds[j % ds.len()];
                if j < 3 {
                    format!("{s} {d}")
                } else if j < 6 {
                    let m = bank_word(&MODIFIERS, (intent.id as usize + j) % MODIFIERS.len(), "mod");
                    format!("{m} {s} {d}")
                } else {
                    let f = bank_word(&FILLER, j % FILLER.len(), "page");
                    format!("{f} {s}")
                }
            })
            .collect();
        profiles.insert(
            intent.id,
            WorldProfile {
                rewrites,
                // A concise reading mentioning the primary aspect only; the
                // secondary disambiguators must come from other signals.
                intent: format!("{cat} {} {s}", ds[0]),
            },
        );
    }

    // Pairs: each training surface pairs with every keyword of every linked
    // intent, so an ambiguous surface appears under BOTH readings (each
    // training pair later carries its own intent's context bundle, like a
    // production log snapshot). The query text alone therefore cannot
    // determine the target — context is the only resolver. Test queries are
    // exactly the held-out surfaces: unseen texts whose neutral modifier
    // carries no trained signal.
    let mut train_pairs = Vec::new();
    let mut test_queries = Vec::new();
    for surf in &surfaces {
        if surf.held_out {
            test_queries.push(WorldQuery {
                surface: surf.text.clone(),
                intent: surf.dominant(),
            });
        } else {
            for &intent_id in &surf.intents {
                for kw in keywords.iter().filter(|k| k.intent == intent_id) {
                    train_pairs.push(WorldPair {
                        surface: surf.text.clone(),
                        intent: intent_id,
                        keyword_id: kw.id,
                    });
                }
            }
        }
    }

    // Closed vocabulary over every text in the world.
    let mut all_texts: Vec<String> = Vec::new();
    all_texts.extend(surfaces.iter().map(|s| s.text.clone()));
    all_texts.extend(keywords.iter().map(|k| k.text.clone()));
    for ds in docs.values() {
        for d in ds {
            all_texts.push(d.title.clone());
            all_texts.push(d.snippet.clone());
        }
    }
    for p in profiles.values() {
        all_texts.extend(p.rewrites.iter().cloned());
        all_texts.push(p.intent.clone());
    }
    let tokenizer = Tokenizer::build(all_texts.iter().map(|s| s.as_str()), 512)?;
    let vocab = tokenizer.words().to_vec();

    Ok(SyntheticWorld {
        seed,
        config: config.clone(),
        categories,
        intents,
        keywords,
        surfaces,
        docs,
        profiles,
        train_pairs,
        test_queries,
        vocab,
    })
}

impl SyntheticWorld {
    pub fn tokenizer(&self, vocab_size: usize) -> Result<Tokenizer> {
        Tokenizer::from_words(self.vocab.clone(), vocab_size)
    }

    pub fn normalizer(&self) -> Normalizer {
        Normalizer::new(self.vocab.iter().cloned())
    }

    /// Corpus keywords as token segments (keyword id = position).
    pub fn corpus_segments(&self, tok: &Tokenizer, config: &ModelConfig) -> Result<Vec<TokenSegment>> {
        self.keywords
            .iter()
            .map(|kw| {
                let ids: Vec<u32> = tok
                    .encode(&kw.text)
                    .into_iter()
                    .take(config.max_len.query)
                    .collect();
                TokenSegment::new(SegmentKind::Query, ids, 0, config)
            })
            .collect()
    }

    /// The provider-facing view: surface -> dominant intent plus per-intent
    /// documents and profile material.
    pub fn context_source(&self) -> WorldSource {
        let mut source = WorldSource::default();
        for surf in &self.surfaces {
            source.query_intent.insert(surf.text.clone(), surf.dominant());
        }
        for (intent, ds) in &self.docs {
            source.intent_docs.insert(
                *intent,
                ds.iter()
                    .map(|d| SimDocument {
                        title: d.title.clone(),
                        snippet: d.snippet.clone(),
                        country: d.country.clone(),
                    })
                    .collect(),
            );
        }
        for (intent, p) in &self.profiles {
            source.intent_profile.insert(
                *intent,
                SimProfile {
                    rewrites: p.rewrites.clone(),
                    intent: p.intent.clone(),
                },
            );
        }
        source
    }

    pub fn ambiguous_share(&self) -> f64 {
        let ambiguous = self.surfaces.iter().filter(|s| s.is_ambiguous()).count();
        ambiguous as f64 / self.surfaces.len() as f64
    }
}

pub fn save_world(world: &SyntheticWorld, path: &Path) -> Result<()> {
    let json = serde_json::to_string_pretty(world).map_err(|e| Error::Format {
        path: path.display().to_string(),
        reason: e.to_string(),
    })?;
    fs::write(path, json)?;
    Ok(())
}

pub fn load_world(path: &Path) -> Result<SyntheticWorld> {
    let text = fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| Error::Format {
        path: path.display().to_string(),
        reason: e.to_string(),
    })
}

/// Corpus file: one keyword per line; line number (0-based) = keyword id.
pub fn save_corpus(world: &SyntheticWorld, path: &Path) -> Result<()> {
    let mut out = String::new();
    for kw in &world.keywords {
        out.push_str(&kw.text);
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}

pub fn load_corpus_lines(path: &Path) -> Result<Vec<String>> {
    let text = fs::read_to_string(path)?;
    Ok(text.lines().map(|l| l.to_string()).collect())
}
