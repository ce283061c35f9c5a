#include <doctest.h>

#include <cmath>

#include "rawden/color_transform.hpp"
#include "support.hpp"

using namespace rawden;

TEST_CASE("T_YUVW maps gray to pure luma")
{
    Image px(1, 1, 4, 1.f);
    const Image out = ColorTransform::yuvw().apply(px);
    CHECK(out.at(0, 0, 0) == doctest::Approx(1.8507).epsilon(1e-6));
    CHECK(out.at(0, 0, 1) == doctest::Approx(0.0).scale(1));
    CHECK(out.at(0, 0, 2) == doctest::Approx(0.0).scale(1));
    CHECK(out.at(0, 0, 3) == doctest::Approx(0.0).scale(1));
}

TEST_CASE("T_YUV maps gray to pure luma")
{
    Image px(1, 1, 3, 1.f);
    const Image out = ColorTransform::yuv().apply(px);
    CHECK(out.at(0, 0, 0) == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(out.at(0, 0, 1) == doctest::Approx(0.0).scale(1));
    CHECK(out.at(0, 0, 2) == doctest::Approx(0.0).scale(1));
}

TEST_CASE("zero-chroma property on random gray frames")
{
    for (const ColorTransform* t : {&ColorTransform::yuvw(), &ColorTransform::yuv()}) {
        const Image gray1 = testsup::random_frame(9, 7, 1, 5, -50.f, 400.f);
        Image gray(9, 7, t->size());
        for (int c = 0; c < t->size(); ++c)
            for (size_t i = 0; i < gray1.plane_size(); ++i)
                gray.plane(c)[i] = gray1.data()[i];
        const Image out = t->apply(gray);
        for (int c = 1; c < t->size(); ++c)
            for (size_t i = 0; i < out.plane_size(); ++i)
                CHECK(std::abs(out.plane(c)[i]) < 1e-3f); // 400 * row-sum tolerance
    }
}

TEST_CASE("forward/inverse round trip within 1e-5 relative")
{
    for (const ColorTransform* t : {&ColorTransform::yuvw(), &ColorTransform::yuv()}) {
        const Image in = testsup::random_frame(16, 12, t->size(), 3, -100.f, 900.f);
        const Image back = t->apply_inverse(t->apply(in));
        for (size_t i = 0; i < in.size(); ++i)
            CHECK(back.data()[i] == doctest::Approx(in.data()[i]).epsilon(1e-5).scale(1000));
    }
}

TEST_CASE("matrix times inverse is the identity")
{
    for (const ColorTransform* t : {&ColorTransform::yuvw(), &ColorTransform::yuv()}) {
        const int n = t->size();
        for (int r = 0; r < n; ++r)
            for (int c = 0; c < n; ++c) {
                double acc = 0;
                for (int k = 0; k < n; ++k)
                    acc += t->matrix()[static_cast<size_t>(r) * n + k] *
                           t->inverse()[static_cast<size_t>(k) * n + c];
                CHECK(std::abs(acc - (r == c ? 1.0 : 0.0)) < 1e-10);
            }
    }
}

TEST_CASE("luma plane equals the first transformed channel")
{
    const Image in = testsup::random_frame(8, 8, 4, 9, 0.f, 100.f);
    const Image full = ColorTransform::yuvw().apply(in);
    const Image y = ColorTransform::yuvw().luma(in);
    for (size_t i = 0; i < y.plane_size(); ++i)
        CHECK(y.data()[i] == doctest::Approx(full.plane(0)[i]).epsilon(1e-6));
}

TEST_CASE("early ISP keeps negative values")
{
    IspParams isp;
    isp.black_level = 64;

    CfaFrame f;
    f.phase = BayerPhase::RGGB;
    f.img = Image(2, 2, 1, 60.f);
    const CfaFrame out = apply_early_isp(f, isp);
    for (int y = 0; y < 2; ++y)
        for (int x = 0; x < 2; ++x)
            CHECK(out.img.at(x, y) == doctest::Approx(-4.0));
}

TEST_CASE("early ISP with zero offset and unit gains is the identity")
{
    IspParams isp;
    CfaFrame f;
    f.img = testsup::random_frame(6, 4, 1, 21, 0.f, 65535.f);
    const CfaFrame out = apply_early_isp(f, isp);
    CHECK(testsup::max_abs_diff(f.img, out.img) == 0.0);
}

TEST_CASE("early ISP applies the R gain at R sites")
{
    IspParams isp;
    isp.black_level = 64;
    isp.wb_gains = {2.0, 1.0, 1.5, 1.0};

    CfaFrame f;
    f.phase = BayerPhase::RGGB;
    f.img = Image(4, 4, 1, 100.f);
    const CfaFrame out = apply_early_isp(f, isp);
    CHECK(out.img.at(0, 0) == doctest::Approx(72.0));  // (100-64)*2, R site
    CHECK(out.img.at(1, 0) == doctest::Approx(36.0));  // G1 site
    CHECK(out.img.at(1, 1) == doctest::Approx(54.0));  // (100-64)*1.5, B site
    CHECK(out.img.at(0, 1) == doctest::Approx(36.0));  // G2 site
}

TEST_CASE("finishing ISP closed forms")
{
    IspParams isp;
    isp.white_level = 1.0;
    isp.black_level = 0.0;

    SUBCASE("identity CCM and gamma 1 pass values through")
    {
        isp.gamma = 1.0;
        Image f(2, 1, 3);
        f.at(0, 0, 0) = 0.25f;
        f.at(0, 0, 1) = 0.5f;
        f.at(0, 0, 2) = 0.75f;
        f.at(1, 0, 0) = 1.3f; // clamps to 1
        f.at(1, 0, 1) = -0.2f;
        f.at(1, 0, 2) = 0.f;
        const Image out = apply_finishing_isp(f, isp);
        CHECK(out.at(0, 0, 0) == doctest::Approx(0.25));
        CHECK(out.at(0, 0, 1) == doctest::Approx(0.5));
        CHECK(out.at(1, 0, 0) == doctest::Approx(1.0));
        CHECK(out.at(1, 0, 1) == doctest::Approx(0.0));
    }

    SUBCASE("gamma 2.2 on 0.25")
    {
        isp.gamma = 2.2;
        Image f(1, 1, 3, 0.25f);
        const Image out = apply_finishing_isp(f, isp);
        CHECK(out.at(0, 0, 0) == doctest::Approx(std::pow(0.25, 1.0 / 2.2)).epsilon(1e-6));
    }
}
