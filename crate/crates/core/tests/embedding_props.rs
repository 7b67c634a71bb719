use logvec_core::embedding::{
    load_store, nearest_template, save_store, Embedding, EmbeddingStore, FallbackEmbedder,
    TemplateEmbedder, TemplateMatch,
};
use logvec_core::Error;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn oracle_distance(a: &[f64], b: &[f64]) -> f64 {
    let mut dot = 0.0;
    let mut na = 0.0;
    let mut nb = 0.0;
    for i in 0..a.len() {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    1.0 - dot / (na.sqrt() * nb.sqrt())
}

/// First minimum over ascending ids.
fn scan(store: &EmbeddingStore, q: &[f64]) -> (u32, f64) {
    let mut best = (u32::MAX, f64::INFINITY);
    for (id, e) in store.iter() {
        let d = oracle_distance(q, e.vector.as_slice());
        if d < best.1 {
            best = (id, d);
        }
    }
    best
}

fn vector(dim: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.0f64..1.0, dim)
        .prop_filter("nonzero", |v| v.iter().any(|x| x.abs() > 1e-3))
}

/// Any finite values, including extremes, as long as the norm is nonzero.
fn any_finite_vector() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(any::<f64>().prop_filter("finite", |x| x.is_finite()), 3)
        .prop_filter("nonzero norm", |v| {
            v.iter().map(|x| x * x).sum::<f64>() > 0.0
        })
}

fn store_and_query() -> impl Strategy<Value = (Vec<(u32, Vec<f64>)>, Vec<f64>)> {
    (2usize..10).prop_flat_map(|dim| {
        (
            prop::collection::btree_map(0u32..500, vector(dim), 1..20)
                .prop_map(|m| m.into_iter().collect()),
            vector(dim),
        )
    })
}

fn build(entries: &[(u32, Vec<f64>)]) -> EmbeddingStore {
    let mut store = EmbeddingStore::new(entries[0].1.len(), "test", "");
    for (id, v) in entries {
        store
            .insert(*id, format!("t{id}"), Embedding::new(v.clone()).unwrap())
            .unwrap();
    }
    store
}

fn random_tokens(rng: &mut ChaCha8Rng, n: usize, tag: &str) -> Vec<String> {
    (0..n)
        .map(|_| format!("{tag}{}", rng.random_range(0..1_000_000u32)))
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig { failure_persistence: None, ..ProptestConfig::with_cases(256) })]

    #[test]
    fn nearest_agrees_with_exhaustive_scan((entries, q) in store_and_query(), cutoff in 0.0f64..2.0) {
        let store = build(&entries);
        let (id, d) = scan(&store, &q);
        let m = nearest_template(&q, &store, cutoff).unwrap();
        prop_assert_eq!(m.closest().template_id, id);
        prop_assert!((m.closest().distance - d).abs() < 1e-12);
        prop_assert_eq!(matches!(m, TemplateMatch::NoMatch(_)), m.closest().distance > cutoff);
    }

    #[test]
    fn duplicate_vectors_go_to_the_lowest_id(v in vector(5), ids in prop::collection::btree_set(0u32..100, 2..6)) {
        let entries: Vec<(u32, Vec<f64>)> = ids.iter().map(|&id| (id, v.clone())).collect();
        let store = build(&entries);
        prop_assert_eq!(store.nearest(&v).unwrap().template_id, *ids.iter().next().unwrap());
    }

    #[test]
    fn cosine_distance_is_symmetric_and_bounded(a in vector(6), b in vector(6)) {
        let ab = logvec_core::embedding::cosine_distance(&a, &b).unwrap();
        let ba = logvec_core::embedding::cosine_distance(&b, &a).unwrap();
        prop_assert!((ab - ba).abs() < 1e-15);
        prop_assert!((0.0..=2.0).contains(&ab));
        prop_assert!((ab - oracle_distance(&a, &b).clamp(0.0, 2.0)).abs() < 1e-12);
    }

    #[test]
    fn substituted_variant_finds_its_template(seed in 0u64..10_000, n in 4usize..9, slot in 0usize..9) {
        let emb = FallbackEmbedder::new(64, seed).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let templates: Vec<Vec<String>> = (0..8).map(|i| random_tokens(&mut rng, n, &format!("w{i}_"))).collect();
        let mut store = EmbeddingStore::new(64, emb.model_name(), "");
        for (i, t) in templates.iter().enumerate() {
            store.insert(i as u32, t.join(" "), emb.embed_tokens(t)).unwrap();
        }
        let mut variant = templates[3].clone();
        variant[slot % n] = "substituted".into();
        let v = emb.embed_tokens(&variant);
        let (oracle_id, _) = scan(&store, v.as_slice());
        prop_assume!(oracle_id == 3);
        prop_assert_eq!(store.nearest(v.as_slice()).unwrap().template_id, 3);
    }

    #[test]
    fn logvec_roundtrip(entries in prop::collection::btree_map(0u32..10_000, any_finite_vector(), 0..12)) {
        let mut store = EmbeddingStore::new(3, "model \"quoted\"", "00ff");
        for (id, v) in &entries {
            store.insert(*id, format!("tpl {id}\twith tab"), Embedding::new(v.clone()).unwrap()).unwrap();
        }
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.logvec");
        save_store(&store, &path).unwrap();
        let loaded = load_store(&path).unwrap();
        prop_assert_eq!(loaded, store);
    }
}

#[test]
fn shared_tokens_are_closer_than_disjoint_ones() {
    let emb = FallbackEmbedder::new(32, 7).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut near = Vec::new();
    let mut far = Vec::new();
    for pair in 0..100 {
        let base = random_tokens(&mut rng, 5, "a");
        let mut four = base.clone();
        four[rng.random_range(0..5)] = format!("z{pair}");
        let none = random_tokens(&mut rng, 5, "b");
        let b = emb.embed_tokens(&base);
        near.push(oracle_distance(
            b.as_slice(),
            emb.embed_tokens(&four).as_slice(),
        ));
        far.push(oracle_distance(
            b.as_slice(),
            emb.embed_tokens(&none).as_slice(),
        ));
    }
    let ordered = near.iter().zip(&far).filter(|(n, f)| n < f).count();
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    assert!(
        mean(&near) < mean(&far),
        "{} vs {}",
        mean(&near),
        mean(&far)
    );
    assert!(ordered >= 95, "only {ordered}/100 pairs ordered");
}

#[test]
fn single_token_is_its_unit_vector() {
    let emb = FallbackEmbedder::new(16, 3).unwrap();
    let e = emb.embed_str("alone");
    for (a, b) in e.as_slice().iter().zip(emb.token_vector("alone")) {
        assert!((a - b).abs() < 1e-15);
    }
}

#[test]
fn embedding_is_bitwise_deterministic() {
    let a = FallbackEmbedder::new(24, 1)
        .unwrap()
        .embed_str("VM Creation took <*> seconds");
    let b = FallbackEmbedder::new(24, 1)
        .unwrap()
        .embed_str("VM Creation took <*> seconds");
    let bits = |e: &Embedding| e.as_slice().iter().map(|x| x.to_bits()).collect::<Vec<_>>();
    assert_eq!(bits(&a), bits(&b));
    let c = FallbackEmbedder::new(24, 2)
        .unwrap()
        .embed_str("VM Creation took <*> seconds");
    assert_ne!(bits(&a), bits(&c));
}

#[test]
fn token_order_matters() {
    let emb = FallbackEmbedder::new(32, 0).unwrap();
    let a = emb.embed_str("disk full on host");
    let b = emb.embed_str("host on full disk");
    assert!(oracle_distance(a.as_slice(), b.as_slice()) > 1e-3);
}

#[test]
fn orthogonal_query_is_no_match() {
    let mut store = EmbeddingStore::new(4, "unit", "");
    for i in 0..3 {
        let mut v = vec![0.0; 4];
        v[i] = 1.0;
        store
            .insert(i as u32, format!("e{i}"), Embedding::new(v).unwrap())
            .unwrap();
    }
    let m = nearest_template(&[0.0, 0.0, 0.0, 1.0], &store, 0.5).unwrap();
    assert!(matches!(m, TemplateMatch::NoMatch(r) if (r.distance - 1.0).abs() < 1e-12));
    assert!(matches!(
        nearest_template(&[1.0, 0.0], &EmbeddingStore::new(2, "e", ""), 0.5),
        Err(Error::EmptyStore)
    ));
}

/// A file laid out the way an external extractor writes it.
#[test]
fn loads_externally_written_file() {
    let text = concat!(
        "{\"format\":\"logvec-v1\",\"dim\":4,\"model\":\"bert-base-uncased\",\"parser_hash\":\"9f2c\",\"count\":2}\n",
        "{\"template_id\":0,\"template\":\"VM Create finished\",\"vector\":[0.10000000000000001,-0.5,0.25,1.0]}\n",
        "{\"template_id\":3,\"template\":\"VM Creation took <*> seconds\",\"vector\":[1e-3,2.5e2,-0.0,3.0]}\n",
    );
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bert.logvec");
    std::fs::write(&path, text).unwrap();
    let store = load_store(&path).unwrap();
    assert_eq!(store.dim(), 4);
    assert_eq!(store.model_name(), "bert-base-uncased");
    assert_eq!(store.parser_hash(), "9f2c");
    assert_eq!(store.vector(3).unwrap(), &[1e-3, 250.0, 0.0, 3.0]);
    assert_eq!(
        store
            .embed_template("VM Create finished")
            .unwrap()
            .as_slice(),
        &[0.1, -0.5, 0.25, 1.0]
    );
    assert!(matches!(
        store.embed_template("unknown"),
        Err(Error::MissingEmbedding(_))
    ));

    let bad = text.replace("[1e-3,2.5e2,-0.0,3.0]", "[1e-3,2.5e2,3.0]");
    std::fs::write(&path, bad).unwrap();
    assert!(matches!(load_store(&path), Err(Error::Format(_))));
}
