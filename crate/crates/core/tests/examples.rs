macro_rules! example {
    ($name:ident, $file:literal) => {
        #[path = $file]
        mod $name;

        #[test]
        fn $name() {
            $name::run().expect(concat!(stringify!($name), " example failed"));
        }
    };
}

example!(schedule_generation, "../examples/schedule_generation.rs");
example!(matrix_exponential, "../examples/matrix_exponential.rs");
example!(smoothness_estimate, "../examples/smoothness_estimate.rs");
example!(decompose_time_dependent, "../examples/decompose_time_dependent.rs");
example!(order_study, "../examples/order_study.rs");
example!(bound_validation, "../examples/bound_validation.rs");
example!(plan_budget, "../examples/plan_budget.rs");
example!(normalization_blowup, "../examples/normalization_blowup.rs");
example!(taylor_terms, "../examples/taylor_terms.rs");
