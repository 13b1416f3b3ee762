mod common;

use std::collections::BTreeMap;

use avs_core::engine::{batch_search, read_run, write_run, CorpusIndex, RunList, SearchMode, SearchRequest};
use avs_core::vectors::ConceptVector;
use common::{check_top_k, densify, naive_cosine, synthetic_corpus, widen, SyntheticCorpus};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn index_of(c: &SyntheticCorpus) -> CorpusIndex {
    CorpusIndex::build(Some(c.dense_store()), c.concept_vectors(), c.bank.clone()).unwrap()
}

fn oracle(c: &SyntheticCorpus, q: &[f32], qc: &BTreeMap<u32, f64>, mode: SearchMode, alpha: f64) -> BTreeMap<String, f64> {
    let qd = widen(q);
    let qs = densify(qc, c.bank.len());
    c.ids
        .iter()
        .enumerate()
        .map(|(i, id)| {
            let e = naive_cosine(&qd, &widen(&c.dense[i]));
            let s = naive_cosine(&qs, &densify(&c.sparse[i], c.bank.len()));
            let score = match mode {
                SearchMode::Embedding => e,
                SearchMode::Concept => s,
                SearchMode::Fusion => alpha * e + (1.0 - alpha) * s,
            };
            (id.clone(), score)
        })
        .collect()
}

fn request(q: &[f32], qc: &BTreeMap<u32, f64>, mode: SearchMode, alpha: f64, k: usize) -> SearchRequest {
    SearchRequest::new("q", mode)
        .with_embedding(q.to_vec())
        .with_concepts(ConceptVector::from_map("q", qc).unwrap())
        .with_alpha(alpha)
        .with_k(k)
}

fn pairs(run: &RunList) -> Vec<(String, f64)> {
    run.entries.iter().map(|e| (e.item_id.clone(), e.score)).collect()
}

fn corpus_args() -> impl Strategy<Value = (u64, usize, usize, usize)> {
    (any::<u64>(), 1usize..150, 1usize..12, 1usize..25)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn search_is_exact_top_k(
        (seed, n, dim, b) in corpus_args(),
        k in 1usize..200,
        alpha in prop::sample::select(vec![0.0, 0.25, 0.5, 0.9, 1.0]),
    ) {
        let c = synthetic_corpus(seed, n, dim, b);
        let index = index_of(&c);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 1);
        let (q, qc) = c.random_query(&mut rng);
        for mode in [SearchMode::Concept, SearchMode::Embedding, SearchMode::Fusion] {
            let run = index.search(&request(&q, &qc, mode, alpha, k)).unwrap();
            let want = oracle(&c, &q, &qc, mode, alpha);
            if let Err(e) = check_top_k(&pairs(&run), &want, k, 1e-9) {
                return Err(TestCaseError::fail(format!("{mode}: {e}")));
            }
            let ranks: Vec<usize> = run.entries.iter().map(|e| e.rank).collect();
            prop_assert_eq!(ranks, (1..=run.entries.len()).collect::<Vec<_>>());
        }
    }

    #[test]
    fn fusion_endpoints_reduce_to_single_modes((seed, n, dim, b) in corpus_args(), k in 1usize..200) {
        let c = synthetic_corpus(seed, n, dim, b);
        let index = index_of(&c);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 2);
        let (q, qc) = c.random_query(&mut rng);
        let run = |mode, alpha| index.search(&request(&q, &qc, mode, alpha, k)).unwrap();
        prop_assert_eq!(run(SearchMode::Fusion, 1.0), run(SearchMode::Embedding, 0.5));
        prop_assert_eq!(run(SearchMode::Fusion, 0.0), run(SearchMode::Concept, 0.5));
    }

    #[test]
    fn fusion_respects_dominance((seed, n, dim, b) in corpus_args(), alpha in 0.0f64..=1.0) {
        let c = synthetic_corpus(seed, n, dim, b);
        let index = index_of(&c);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 3);
        let (q, qc) = c.random_query(&mut rng);
        let emb = oracle(&c, &q, &qc, SearchMode::Embedding, alpha);
        let con = oracle(&c, &q, &qc, SearchMode::Concept, alpha);
        let run = index.search(&request(&q, &qc, SearchMode::Fusion, alpha, n)).unwrap();
        let pos: BTreeMap<&str, usize> = run.entries.iter().map(|e| (e.item_id.as_str(), e.rank)).collect();
        for a in &c.ids {
            for b in &c.ids {
                let strictly = emb[a] > emb[b] + 1e-9 && con[a] > con[b] + 1e-9;
                if strictly && alpha > 0.0 && alpha < 1.0 {
                    prop_assert!(pos[a.as_str()] < pos[b.as_str()], "{} should precede {}", a, b);
                }
            }
        }
    }

    #[test]
    fn query_scaling_preserves_ranking((seed, n, dim, b) in corpus_args(), k in 1usize..200) {
        let c = synthetic_corpus(seed, n, dim, b);
        let index = index_of(&c);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 4);
        let (q, qc) = c.random_query(&mut rng);
        // power-of-two scaling is exact, so results are identical
        let q2: Vec<f32> = q.iter().map(|x| x * 4.0).collect();
        let qc2: BTreeMap<u32, f64> = qc.iter().map(|(k, v)| (*k, v * 0.5)).collect();
        for mode in [SearchMode::Concept, SearchMode::Embedding, SearchMode::Fusion] {
            let a = index.search(&request(&q, &qc, mode, 0.5, k)).unwrap();
            let b = index.search(&request(&q2, &qc2, mode, 0.5, k)).unwrap();
            prop_assert_eq!(a, b);
        }
    }

    #[test]
    fn batches_ignore_thread_count((seed, n, dim, b) in corpus_args(), threads in 2usize..6) {
        let c = synthetic_corpus(seed, n, dim, b);
        let index = index_of(&c);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 5);
        let reqs: Vec<SearchRequest> = (0..8)
            .map(|i| {
                let (q, qc) = c.random_query(&mut rng);
                let mode = [SearchMode::Concept, SearchMode::Embedding, SearchMode::Fusion][i % 3];
                let mut r = request(&q, &qc, mode, 0.5, 50);
                r.query_id = format!("q{i}");
                r
            })
            .collect();
        let one: Vec<RunList> = batch_search(&index, &reqs, 1).into_iter().map(Result::unwrap).collect();
        let many: Vec<RunList> = batch_search(&index, &reqs, threads).into_iter().map(Result::unwrap).collect();
        let (mut a, mut b) = (Vec::new(), Vec::new());
        write_run(&one, "t", &mut a).unwrap();
        write_run(&many, "t", &mut b).unwrap();
        prop_assert_eq!(&a, &b);
        let parsed = read_run(a.as_slice()).unwrap();
        prop_assert_eq!(parsed.len(), one.len());
    }

    #[test]
    fn index_file_round_trip((seed, n, dim, b) in corpus_args()) {
        let c = synthetic_corpus(seed, n, dim, b);
        let index = index_of(&c);
        let mut buf = Vec::new();
        index.write_to(&mut buf).unwrap();
        let back = CorpusIndex::read_from(buf.as_slice()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 6);
        let (q, qc) = c.random_query(&mut rng);
        for mode in [SearchMode::Concept, SearchMode::Embedding, SearchMode::Fusion] {
            let r = request(&q, &qc, mode, 0.5, 30);
            prop_assert_eq!(index.search(&r).unwrap(), back.search(&r).unwrap());
        }
    }
}

/// Large enough to take the chunked parallel scan.
#[test]
fn parallel_scan_matches_sequential() {
    let c = synthetic_corpus(7, 70_000, 4, 10);
    let index = index_of(&c);
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let (q, qc) = c.random_query(&mut rng);
    let req = request(&q, &qc, SearchMode::Fusion, 0.5, 500);
    let run_in = |threads| {
        rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap().install(|| index.search(&req).unwrap())
    };
    let seq = run_in(1);
    assert_eq!(seq, run_in(4));
    let want = oracle(&c, &q, &qc, SearchMode::Fusion, 0.5);
    check_top_k(&pairs(&seq), &want, 500, 1e-9).unwrap();
}
