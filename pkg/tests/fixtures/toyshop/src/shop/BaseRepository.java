package shop;

public class BaseRepository {
    protected int stored;

    public void save(Customer customer) {
        validate(customer);
        stored = stored + 1;
    }

    private void validate(Customer customer) {
        customer.describe();
    }
}
