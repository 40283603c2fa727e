use comanip_core::acceptance::evaluate_all;

#[test]
fn acceptance_criteria() {
    let results = evaluate_all().expect("scenario runs");
    for r in &results {
        println!("{r}");
    }
    let failed: Vec<u8> = results.iter().filter(|r| !r.passed).map(|r| r.id).collect();
    assert!(failed.is_empty(), "failing criteria: {failed:?}");
}
