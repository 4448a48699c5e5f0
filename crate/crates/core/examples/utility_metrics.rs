//! Price bounds and utilities for the apartment scenario (targets 2550 / 1530).

use anchorbench::metrics::{buyer_utility, derive_price_bounds, seller_utility, susceptibility};
use anchorbench::Money;

fn main() {
    let st: Money = "2550".parse().unwrap();
    let bt: Money = "1530".parse().unwrap();
    let b = derive_price_bounds(st, bt).unwrap();
    println!("seller target {}  seller min {}", b.seller_target, b.seller_min);
    println!("buyer max {}      buyer target {}", b.buyer_max, b.buyer_target);
    println!("\n{:>8} {:>9} {:>9} {:>9}", "price", "u_seller", "u_buyer", "sum");
    for p in ["1530", "1836", "1950", "2150", "2244", "2400", "2450", "2550"] {
        let p: Money = p.parse().unwrap();
        let (s, u) = (seller_utility(&b, p), buyer_utility(&b, p));
        println!("{:>8} {:>9.4} {:>9.4} {:>9.4}", p.to_string(), s, u, s + u);
    }
    let base = buyer_utility(&b, "2150".parse().unwrap());
    let anchored = buyer_utility(&b, "2450".parse().unwrap());
    println!("\nbuyer utility drop 2150 -> 2450: {:.4}", susceptibility(base, anchored));
}
