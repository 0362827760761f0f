//! Parse ranked sets, expand them into training pairs under both schemes and
//! draw a reproducible train/validation split.
//!
//! ```bash
//! cargo run -p rankalign --example rankings_to_pairs
//! ```

use rankalign::dataset::{build_all_pairs, parse_rankings, split_sets, PairScheme};

const RANKINGS: &str = r#"{"set_id":"cat","target_id":"cat_t","images":["a","b","c","d"],"human_order":["c","a","d","b"]}
{"set_id":"dog","target_id":"dog_t","images":["a","b","c"],"human_order":["b","c","a"]}
{"set_id":"owl","target_id":"owl_t","images":["a","b","c","d","e"],"human_order":["e","d","c","b","a"]}
"#;

fn main() -> rankalign::Result<()> {
    let sets = parse_rankings(RANKINGS, "inline")?;
    for set in &sets {
        println!("{}: human ranks {:?}", set.set_id, set.human_ranks());
    }
    for scheme in [PairScheme::AllPairs, PairScheme::Adjacent] {
        let pairs = build_all_pairs(&sets, scheme);
        println!("{scheme}: {} pairs", pairs.len());
        for p in pairs.iter().take(4) {
            println!("    {}: {} closer than {}", p.set_id, p.pos_id, p.neg_id);
        }
    }
    let plan = split_sets(&sets, 0.7, 42)?;
    println!("split (seed 42): train {:?}, val {:?}", plan.train_set_ids, plan.val_set_ids);

    match parse_rankings("{\"set_id\":\"x\",\"target_id\":\"t\",\"images\":[\"a\",\"b\"],\"human_order\":[\"a\"]}", "bad.jsonl") {
        Ok(_) => unreachable!("an incomplete ordering is rejected"),
        Err(e) => println!("rejected: {e}"),
    }
    Ok(())
}
