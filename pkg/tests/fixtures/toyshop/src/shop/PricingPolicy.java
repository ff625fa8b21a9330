package shop;

// Strategy for turning a raw total into a charged amount.
public interface PricingPolicy {
    int discount(int total);
}
