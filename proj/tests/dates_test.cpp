#include <doctest.h>

#include <random>

#include "oracles.hpp"
#include "readmit/dates.hpp"
#include "readmit/errors.hpp"
#include "readmit/records.hpp"

using readmit::Date;
using readmit::Season;

TEST_CASE("compute_los whole-day differences") {
  CHECK(readmit::compute_los(Date::parse("2010-01-01"),
                             Date::parse("2010-01-01")) == 0);
  CHECK(readmit::compute_los(Date::parse("2010-01-01"),
                             Date::parse("2010-01-06")) == 5);
  // month boundary, checked against the independent calendar oracle
  CHECK(oracles::days_since_epoch(2010, 3, 2) -
            oracles::days_since_epoch(2010, 2, 27) == 3);
  CHECK(readmit::compute_los(Date::parse("2010-02-27"),
                             Date::parse("2010-03-02")) == 3);
}

TEST_CASE("compute_los rejects negative intervals naming the admission") {
  readmit::AdmissionRecord rec;
  rec.admission_id = "A-42";
  rec.admit_date = Date::parse("2010-05-10");
  rec.discharge_date = Date::parse("2010-05-09");
  CHECK_THROWS_WITH_AS(readmit::compute_los(rec),
                       doctest::Contains("A-42"), readmit::ValidationError);
}

TEST_CASE("date arithmetic matches the stepping oracle on random dates") {
  std::mt19937_64 rng{7};
  std::uniform_int_distribution<int> year(1995, 2030);
  std::uniform_int_distribution<int> month(1, 12);
  for (int k = 0; k < 500; ++k) {
    const int y = year(rng);
    const int m = month(rng);
    std::uniform_int_distribution<int> day(1, oracles::days_in_month(y, m));
    const int d = day(rng);
    Date date = Date::from_ymd(y, unsigned(m), unsigned(d));
    CHECK(date.days_since_epoch() == oracles::days_since_epoch(y, m, d));
    // round trip through the ISO string
    CHECK(Date::parse(date.to_string()) == date);
  }
}

TEST_CASE("leap-day parsing") {
  CHECK(Date::parse("2012-02-29").to_string() == "2012-02-29");
  CHECK_THROWS_AS(Date::parse("2011-02-29"), readmit::ValidationError);
  CHECK_THROWS_AS(Date::parse("2011-2-9"), readmit::ValidationError);
  CHECK_THROWS_AS(Date::parse("garbage-date"), readmit::ValidationError);
}

TEST_CASE("meteorological seasons") {
  CHECK(Date::parse("2010-12-01").season() == Season::winter);
  CHECK(Date::parse("2010-01-15").season() == Season::winter);
  CHECK(Date::parse("2010-02-28").season() == Season::winter);
  CHECK(Date::parse("2010-03-01").season() == Season::spring);
  CHECK(Date::parse("2010-05-31").season() == Season::spring);
  CHECK(Date::parse("2010-06-01").season() == Season::summer);
  CHECK(Date::parse("2010-08-31").season() == Season::summer);
  CHECK(Date::parse("2010-09-01").season() == Season::fall);
  CHECK(Date::parse("2010-11-30").season() == Season::fall);
}
