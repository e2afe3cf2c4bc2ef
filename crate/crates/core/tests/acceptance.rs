use fraccons::selftest::run_all;

#[test]
fn acceptance_criteria() {
    let results = run_all();
    for r in &results {
        println!("{r}");
    }
    let failed: Vec<u8> = results.iter().filter(|r| !r.passed).map(|r| r.number).collect();
    assert!(failed.is_empty(), "failing criteria: {failed:?}");
}
