//! Browser bindings: concept extraction from a bracketed parse, the frame
//! schedule, and fused ranking over a small built-in corpus.

use std::sync::OnceLock;

use avs_core::concepts::{build_bank, count_concepts, extract_emissions, NormalizationConfig};
use avs_core::dataset::frame_schedule;
use avs_core::engine::{CorpusIndex, SearchMode, SearchRequest};
use avs_core::treebank::{parse_bracketed, ParseTree};
use avs_core::vectors::{captions_to_video_concept_vector, text_to_concept_vector, DenseStore, EmbeddingRecord, WeightingScheme};
use serde_json::json;
use wasm_bindgen::prelude::*;

/// Dimension of the hashed bag-of-words stand-in embedding.
const TOY_DIM: usize = 32;

const TOY_VIDEOS: &[(&str, &[&str])] = &[
    ("v01", &[
        "(S (NP (DT a) (JJ young) (NN man)) (VP (VBZ is) (VP (VBG holding) (NP (PRP$ his) (NNS hands)))))",
        "(S (NP (DT a) (NN man)) (VP (VBZ sits) (PP (IN in) (NP (NP (NN front)) (PP (IN of) (NP (DT a) (NN brick) (NN wall)))))))",
    ]),
    ("v02", &[
        "(S (NP (DT a) (NN woman)) (VP (VBZ is) (VP (VBG cooking) (PP (IN in) (NP (DT the) (NN kitchen))))))",
        "(S (NP (DT the) (NN woman)) (VP (VBZ cuts) (NP (NNS vegetables))))",
    ]),
    ("v03", &[
        "(S (NP (DT a) (JJ small) (NN dog)) (VP (VBZ is) (VP (VBG running) (PP (IN in) (NP (DT the) (NN park))))))",
        "(S (NP (DT the) (NN dog)) (VP (VBZ chases) (NP (DT a) (NN ball))))",
    ]),
    ("v04", &[
        "(S (NP (CD two) (NNS men)) (VP (VBP are) (VP (VBG playing) (NP (NN guitar)))))",
        "(S (NP (DT a) (NN man)) (VP (VBZ plays) (NP (DT a) (NN guitar)) (PP (IN on) (NP (NN stage)))))",
    ]),
    ("v05", &[
        "(S (NP (DT a) (NN girl)) (VP (VBZ puts) (NP (PRP$ her) (NN hand)) (PP (TO to) (NP (PRP$ her) (NN face)))))",
        "(S (NP (DT a) (JJ young) (NN girl)) (VP (VBZ is) (VP (VBG smiling))))",
    ]),
    ("v06", &[
        "(S (NP (DT a) (NN car)) (VP (VBZ drives) (PP (IN down) (NP (DT the) (NN street)))))",
        "(S (NP (DT a) (JJ red) (NN car)) (VP (VBZ is) (VP (VBG parked) (PP (IN near) (NP (DT a) (NN wall))))))",
    ]),
    ("v07", &[
        "(S (NP (NNS people)) (VP (VBP are) (VP (VBG dancing) (PP (IN at) (NP (DT a) (NN party))))))",
        "(S (NP (DT a) (NN woman)) (VP (VBZ dances) (PP (IN with) (NP (DT a) (NN man)))))",
    ]),
    ("v08", &[
        "(S (NP (DT a) (NN man)) (VP (VBZ is) (VP (VBG sitting) (PRT (RP down)) (PP (IN on) (NP (DT a) (NN bench))))))",
        "(S (NP (DT an) (JJ old) (NN man)) (VP (VBZ reads) (NP (DT a) (NN newspaper))))",
    ]),
];

/// Concepts of one bracketed parse as JSON:
/// `[{"surface": ..., "kinds": [...], "count": n}, ...]`.
pub fn concepts_json(tree: &str) -> Result<String, String> {
    let tree = parse_bracketed(tree).map_err(|e| e.to_string())?;
    let items: Vec<_> = extract_emissions(&tree, &NormalizationConfig::default())
        .into_iter()
        .map(|e| {
            let kinds: Vec<&str> = e.concept.kinds.iter().map(|k| k.name()).collect();
            json!({ "surface": e.concept.surface, "kinds": kinds, "count": e.count })
        })
        .collect();
    Ok(serde_json::Value::Array(items).to_string())
}

pub fn frames(duration: f64, spacing: f64, target_frames: usize) -> Result<Vec<f64>, String> {
    frame_schedule(duration, spacing, target_frames).map_err(|e| e.to_string())
}

/// Feature-hashed, lemmatized bag of words; a stand-in for a learned encoder.
fn toy_embedding(tree: &ParseTree, cfg: &NormalizationConfig) -> Vec<f32> {
    let mut v = vec![0f32; TOY_DIM];
    let tagged = tree.root().leaves().filter_map(|l| l.token().map(|t| (l.label(), t)));
    for word in cfg.normalize_tagged(tagged) {
        let h = word.bytes().fold(0xcbf2_9ce4_8422_2325u64, |h, b| (h ^ b as u64).wrapping_mul(0x100_0000_01b3));
        let sign = if h >> 63 == 0 { 1.0 } else { -1.0 };
        v[(h % TOY_DIM as u64) as usize] += sign;
    }
    v
}

struct Toy {
    index: CorpusIndex,
    captions: Vec<(String, String)>,
}

fn toy() -> &'static Toy {
    static TOY: OnceLock<Toy> = OnceLock::new();
    TOY.get_or_init(|| {
        let cfg = NormalizationConfig::default();
        let parsed: Vec<(&str, Vec<ParseTree>)> = TOY_VIDEOS
            .iter()
            .map(|(id, caps)| (*id, caps.iter().map(|c| parse_bracketed(c).expect("built-in trees parse")).collect()))
            .collect();
        let bank = build_bank(&count_concepts(parsed.iter().flat_map(|(_, t)| t), &cfg), 1);
        let mut dense = DenseStore::new(TOY_DIM).expect("nonzero dim");
        let mut vectors = Vec::new();
        let mut captions = Vec::new();
        for (id, trees) in &parsed {
            let mut sum = vec![0f32; TOY_DIM];
            for t in trees {
                for (s, x) in sum.iter_mut().zip(toy_embedding(t, &cfg)) {
                    *s += x;
                }
            }
            dense.push(EmbeddingRecord::new(*id, sum)).expect("fixed dim");
            vectors.push(captions_to_video_concept_vector(id, trees, &bank, &cfg));
            let text = trees.iter().map(|t| t.yield_tokens().join(" ")).collect::<Vec<_>>().join(" / ");
            captions.push((id.to_string(), text));
        }
        let index = CorpusIndex::build(Some(dense), vectors, bank).expect("toy corpus is valid");
        Toy { index, captions }
    })
}

/// Ranks the built-in corpus for a bracketed query parse. Each row carries
/// the fused score and both components:
/// `[{"rank", "item", "caption", "score", "concept", "embedding"}, ...]`.
pub fn rank_json(query_tree: &str, alpha: f64) -> Result<String, String> {
    let toy = toy();
    let cfg = NormalizationConfig::default();
    let tree = parse_bracketed(query_tree).map_err(|e| e.to_string())?;
    let concepts = text_to_concept_vector("query", &tree, toy.index.bank(), &WeightingScheme::TermFrequency, &cfg)
        .map_err(|e| e.to_string())?;
    let embedding = toy_embedding(&tree, &cfg);
    let n = toy.index.len();
    let req = |mode| {
        SearchRequest::new("query", mode)
            .with_embedding(embedding.clone())
            .with_concepts(concepts.clone())
            .with_alpha(alpha)
            .with_k(n)
    };
    let search = |mode| toy.index.search(&req(mode)).map_err(|e| e.to_string());
    let fused = search(SearchMode::Fusion)?;
    let score_of = |run: &avs_core::engine::RunList, id: &str| {
        run.entries.iter().find(|e| e.item_id == id).map_or(0.0, |e| e.score)
    };
    let (con, emb) = (search(SearchMode::Concept)?, search(SearchMode::Embedding)?);
    let rows: Vec<_> = fused
        .entries
        .iter()
        .map(|e| {
            let caption = toy.captions.iter().find(|(id, _)| *id == e.item_id).map_or("", |(_, c)| c.as_str());
            json!({
                "rank": e.rank,
                "item": e.item_id,
                "caption": caption,
                "score": e.score,
                "concept": score_of(&con, &e.item_id),
                "embedding": score_of(&emb, &e.item_id),
            })
        })
        .collect();
    Ok(serde_json::Value::Array(rows).to_string())
}

#[wasm_bindgen(js_name = extractConcepts)]
pub fn extract_concepts_js(tree: &str) -> Result<String, JsError> {
    concepts_json(tree).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = frameSchedule)]
pub fn frame_schedule_js(duration: f64, spacing: f64, target_frames: usize) -> Result<Vec<f64>, JsError> {
    frames(duration, spacing, target_frames).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = rankToyCorpus)]
pub fn rank_toy_corpus_js(query_tree: &str, alpha: f64) -> Result<String, JsError> {
    rank_json(query_tree, alpha).map_err(|e| JsError::new(&e))
}
