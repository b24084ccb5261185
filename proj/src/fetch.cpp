// deltascan: permission-control vulnerability scanner for EVM contracts
// Copyright 2026 The deltascan Authors.
// SPDX-License-Identifier: Apache-2.0
#include <deltascan/pipeline.hpp>

#include "binary_io.hpp"

#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>
#include <json.hpp>

#include <cctype>
#include <thread>

namespace deltascan::pipeline
{
namespace
{
using Clock = std::chrono::steady_clock;

enum class Outcome
{
    done,
    retry,
    fail,
};

struct Attempt
{
    Outcome outcome = Outcome::fail;
    Bytes code;
    std::string message;
};

bool mentions_rate_limit(std::string_view text)
{
    std::string lower{text};
    for (auto& c : lower)
        c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return lower.find("rate limit") != std::string::npos;
}

Attempt interpret(const HttpResponse& response)
{
    if (response.status == 429 || response.status >= 500)
        return {Outcome::retry, {}, "HTTP " + std::to_string(response.status)};
    if (response.status != 200)
        return {Outcome::fail, {}, "HTTP " + std::to_string(response.status)};
    const auto body = nlohmann::json::parse(response.body, nullptr, false);
    if (body.is_discarded() || !body.is_object())
        return {Outcome::fail, {}, "response is not a JSON object"};
    const auto result = body.find("result");
    if (result == body.end() || !result->is_string())
    {
        if (body.contains("error"))
            return {Outcome::fail, {}, body["error"].dump()};
        return {Outcome::fail, {}, "response has no result"};
    }
    const auto text = result->get<std::string>();
    if (body.value("status", "1") == "0" || !text.starts_with("0x"))
    {
        if (mentions_rate_limit(text) || mentions_rate_limit(body.value("message", "")))
            return {Outcome::retry, {}, text};
        return {Outcome::fail, {}, text};
    }
    try
    {
        return {Outcome::done, from_hex(text), {}};
    }
    catch (const HexError& e)
    {
        return {Outcome::fail, {}, e.what()};
    }
}

std::string request_url(const PipelineConfig& config, const std::string& address)
{
    std::string url = config.api_url;
    url += url.find('?') == std::string::npos ? '?' : '&';
    url += "module=proxy&action=eth_getCode&address=" + address + "&tag=latest";
    if (config.api_key)
        url += "&apikey=" + *config.api_key;
    return url;
}

}  // namespace

std::string_view to_string(FetchStatus s) noexcept
{
    switch (s)
    {
    case FetchStatus::fetched:
        return "fetched";
    case FetchStatus::cached:
        return "cached";
    case FetchStatus::not_a_contract:
        return "not_a_contract";
    case FetchStatus::failed:
        return "failed";
    }
    return "failed";
}

std::string normalize_address(std::string_view address)
{
    if (address.size() != 42 || address[0] != '0' || (address[1] != 'x' && address[1] != 'X'))
        throw BadAddress{"address must be 0x followed by 40 hex digits: '" + std::string{address} + "'"};
    std::string out = "0x";
    for (const char c : address.substr(2))
    {
        if (!std::isxdigit(static_cast<unsigned char>(c)))
            throw BadAddress{"address has a non-hex digit: '" + std::string{address} + "'"};
        out += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    }
    return out;
}

Transport http_transport(std::chrono::seconds timeout)
{
    return [timeout](const std::string& url) {
        const auto scheme_end = url.find("://");
        if (scheme_end == std::string::npos)
            throw NetworkError{"URL has no scheme: " + url};
        const auto path_start = url.find('/', scheme_end + 3);
        const auto origin = url.substr(0, path_start);
        const auto target = path_start == std::string::npos ? std::string{"/"} : url.substr(path_start);
        httplib::Client client{origin};
        client.set_connection_timeout(timeout);
        client.set_read_timeout(timeout);
        client.set_follow_location(true);
        const auto res = client.Get(target);
        if (!res)
            throw NetworkError{"request failed: " + httplib::to_string(res.error())};
        return HttpResponse{res->status, res->body};
    };
}

std::vector<FetchResult> cmd_fetch(const std::vector<std::string>& addresses, const PipelineConfig& config,
    const Transport& transport, const FetchOptions& options)
{
    std::vector<std::string> normalized;
    normalized.reserve(addresses.size());
    for (const auto& a : addresses)
        normalized.push_back(normalize_address(a));
    if (!(config.requests_per_second > 0))
        throw ConfigError{"requests_per_second must be positive"};

    const auto sleep = options.sleep ? options.sleep : [](std::chrono::milliseconds d) {
        std::this_thread::sleep_for(d);
    };
    const auto interval = std::chrono::milliseconds{static_cast<long long>(1000.0 / config.requests_per_second)};
    std::optional<Clock::time_point> last_request;
    auto pace = [&] {
        if (last_request)
        {
            const auto wait = interval - std::chrono::duration_cast<std::chrono::milliseconds>(Clock::now() - *last_request);
            if (wait.count() > 0)
                sleep(wait);
        }
        last_request = Clock::now();
    };

    std::vector<FetchResult> out;
    for (const auto& address : normalized)
    {
        FetchResult r;
        r.address = address;
        r.path = config.cache_dir / (address + ".bin");
        if (std::filesystem::exists(r.path))
        {
            r.status = FetchStatus::cached;
            out.push_back(std::move(r));
            continue;
        }
        if (config.api_url.empty())
            throw ConfigError{"api_url is not configured"};

        auto backoff = options.initial_backoff;
        Attempt attempt;
        for (std::size_t tries = 0;; ++tries)
        {
            pace();
            try
            {
                attempt = interpret(transport(request_url(config, address)));
            }
            catch (const NetworkError& e)
            {
                attempt = {Outcome::retry, {}, e.what()};
            }
            if (attempt.outcome != Outcome::retry || tries >= options.max_retries)
                break;
            sleep(backoff);
            backoff *= 2;
        }

        if (attempt.outcome != Outcome::done)
        {
            r.status = FetchStatus::failed;
            r.message = attempt.message;
        }
        else if (attempt.code.empty())
        {
            r.status = FetchStatus::not_a_contract;
            r.message = "no code at address";
        }
        else
        {
            std::filesystem::create_directories(config.cache_dir);
            io::write_file(r.path, std::string_view{reinterpret_cast<const char*>(attempt.code.data()), attempt.code.size()});
            r.status = FetchStatus::fetched;
        }
        out.push_back(std::move(r));
    }
    return out;
}

}  // namespace deltascan::pipeline
