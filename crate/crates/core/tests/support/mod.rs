pub mod exact_kernel;
