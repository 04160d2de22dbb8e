//! Samples a small blockmodel dataset, writes it to disk, and reads it back.
//!
//!     cargo run --example dataset_gen

use ldp_lab::model::{generate_dataset, Dataset, ModelParams};

fn main() {
    let params = ModelParams {
        n_items: 20,
        n_users: 8,
        alpha: vec![0.5, 0.5],
        beta: vec![0.5, 0.5],
        affinity: vec![vec![0.9, 0.1], vec![0.2, 0.8]],
        rated_per_user: 5,
        epsilon: 1.0,
        theta: 1.0,
    };
    let data = generate_dataset(&params, 42).unwrap();
    println!(
        "{} items in {} classes, {} users rating {} items each",
        data.n_items, data.n_item_classes, data.users.len(), data.rated_per_user
    );
    for user in &data.users {
        let rated: Vec<String> = user
            .items
            .iter()
            .zip(&user.ratings)
            .map(|(i, r)| format!("{i}:{r}"))
            .collect();
        println!("  user {:>2} (class {}): {}", user.user_id, user.class, rated.join(" "));
    }

    let path = std::env::temp_dir().join("ldp-lab-demo.dataset");
    data.write_file(&path, Some("demo dataset")).unwrap();
    let back = Dataset::read_file(&path).unwrap();
    assert_eq!(back.item_class, data.item_class);
    assert_eq!(back.users.len(), data.users.len());
    println!("round-tripped through {}", path.display());
}
