//! Parses questionnaire replies and aggregates them into the four
//! satisfaction dimensions.

use anchorbench::agents::Role;
use anchorbench::survey::{
    aggregate_response, item_means, dimensions_from_items, parse_survey_reply, Questionnaire, SatisfactionDimension,
    SurveyResponse,
};

fn main() {
    let q = Questionnaire::builtin();
    println!("{} items; reversed items {:?}", q.items.len(), q.reversed_items);
    let replies = [
        "1. 5\n2. 6\n3. 2\n4. 5\n5. 1\n6. 7\n7. 4\n8. 6\n9. 5\n10. 6\n11. 5\n12. 5\n13. 5\n14. 5\n15. 5\n16. 5",
        "4, 5, 2, 6, 1, 7, 4, 6, 6, 7, 6, 5, 6, 5, 6, 6",
    ];
    let mut responses = Vec::new();
    for (i, reply) in replies.iter().enumerate() {
        let scores = parse_survey_reply(reply).unwrap();
        let r = SurveyResponse::new(format!("run{i}"), Role::Buyer, scores).unwrap();
        let d = aggregate_response(&r);
        println!("run{i}:");
        for dim in SatisfactionDimension::ALL {
            println!("  {:<28} {:.2}", dim.title(), d.get(dim));
        }
        responses.push(r);
    }
    let pooled = dimensions_from_items(&item_means(&responses).unwrap());
    println!("pooled over runs:");
    for dim in SatisfactionDimension::ALL {
        println!("  {:<28} {:.3}", dim.title(), pooled.get(dim));
    }
}
